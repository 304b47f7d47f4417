#include <string_view>

#include "hlgp/tasks.hpp"

namespace hlgp {
namespace {

// Public-domain texts (Lincoln, the Declaration and Constitution preambles,
// the King James Bible, Shakespeare, Blake, Dickinson, Poe, Frost).
constexpr std::string_view kCorpus = R"(four score and seven years ago our fathers brought forth on this continent, a new nation, conceived in liberty, and dedicated to the proposition that all men are created equal.
now we are engaged in a great civil war, testing whether that nation, or any nation so conceived and so dedicated, can long endure. we are met on a great battle-field of that war. we have come to dedicate a portion of that field, as a final resting place for those who here gave their lives that that nation might live. it is altogether fitting and proper that we should do this.
but, in a larger sense, we can not dedicate -- we can not consecrate -- we can not hallow -- this ground. the brave men, living and dead, who struggled here, have consecrated it, far above our poor power to add or detract. the world will little note, nor long remember what we say here, but it can never forget what they did here. it is for us the living, rather, to be dedicated here to the unfinished work which they who fought here have thus far so nobly advanced. it is rather for us to be here dedicated to the great task remaining before us -- that from these honored dead we take increased devotion to that cause for which they gave the last full measure of devotion -- that we here highly resolve that these dead shall not have died in vain -- that this nation, under god, shall have a new birth of freedom -- and that government of the people, by the people, for the people, shall not perish from the earth.
when in the course of human events, it becomes necessary for one people to dissolve the political bands which have connected them with another, and to assume among the powers of the earth, the separate and equal station to which the laws of nature and of nature's god entitle them, a decent respect to the opinions of mankind requires that they should declare the causes which impel them to the separation.
we hold these truths to be self-evident, that all men are created equal, that they are endowed by their creator with certain unalienable rights, that among these are life, liberty and the pursuit of happiness. that to secure these rights, governments are instituted among men, deriving their just powers from the consent of the governed, that whenever any form of government becomes destructive of these ends, it is the right of the people to alter or to abolish it, and to institute new government, laying its foundation on such principles and organizing its powers in such form, as to them shall seem most likely to effect their safety and happiness. prudence, indeed, will dictate that governments long established should not be changed for light and transient causes; and accordingly all experience hath shewn, that mankind are more disposed to suffer, while evils are sufferable, than to right themselves by abolishing the forms to which they are accustomed.
we the people of the united states, in order to form a more perfect union, establish justice, insure domestic tranquility, provide for the common defence, promote the general welfare, and secure the blessings of liberty to ourselves and our posterity, do ordain and establish this constitution for the united states of america.
in the beginning god created the heaven and the earth. and the earth was without form, and void; and darkness was upon the face of the deep. and the spirit of god moved upon the face of the waters. and god said, let there be light: and there was light. and god saw the light, that it was good: and god divided the light from the darkness. and god called the light day, and the darkness he called night. and the evening and the morning were the first day.
and god said, let there be a firmament in the midst of the waters, and let it divide the waters from the waters. and god made the firmament, and divided the waters which were under the firmament from the waters which were above the firmament: and it was so. and god called the firmament heaven. and the evening and the morning were the second day.
and god said, let the waters under the heaven be gathered together unto one place, and let the dry land appear: and it was so. and god called the dry land earth; and the gathering together of the waters called he seas: and god saw that it was good.
the lord is my shepherd; i shall not want. he maketh me to lie down in green pastures: he leadeth me beside the still waters. he restoreth my soul: he leadeth me in the paths of righteousness for his name's sake. yea, though i walk through the valley of the shadow of death, i will fear no evil: for thou art with me; thy rod and thy staff they comfort me. thou preparest a table before me in the presence of mine enemies: thou anointest my head with oil; my cup runneth over. surely goodness and mercy shall follow me all the days of my life: and i will dwell in the house of the lord for ever.
to every thing there is a season, and a time to every purpose under the heaven: a time to be born, and a time to die; a time to plant, and a time to pluck up that which is planted; a time to kill, and a time to heal; a time to break down, and a time to build up; a time to weep, and a time to laugh; a time to mourn, and a time to dance; a time to cast away stones, and a time to gather stones together; a time to embrace, and a time to refrain from embracing; a time to get, and a time to lose; a time to keep, and a time to cast away; a time to rend, and a time to sew; a time to keep silence, and a time to speak; a time to love, and a time to hate; a time of war, and a time of peace.
shall i compare thee to a summer's day? thou art more lovely and more temperate: rough winds do shake the darling buds of may, and summer's lease hath all too short a date: sometime too hot the eye of heaven shines, and often is his gold complexion dimm'd; and every fair from fair sometime declines, by chance or nature's changing course untrimm'd; but thy eternal summer shall not fade nor lose possession of that fair thou owest; nor shall death brag thou wander'st in his shade, when in eternal lines to time thou growest: so long as men can breathe or eyes can see, so long lives this and this gives life to thee.
let me not to the marriage of true minds admit impediments. love is not love which alters when it alteration finds, or bends with the remover to remove: o no! it is an ever-fixed mark that looks on tempests and is never shaken; it is the star to every wandering bark, whose worth's unknown, although his height be taken. love's not time's fool, though rosy lips and cheeks within his bending sickle's compass come: love alters not with his brief hours and weeks, but bears it out even to the edge of doom. if this be error and upon me proved, i never writ, nor no man ever loved.
to be, or not to be, that is the question: whether 'tis nobler in the mind to suffer the slings and arrows of outrageous fortune, or to take arms against a sea of troubles and by opposing end them. to die -- to sleep, no more; and by a sleep to say we end the heart-ache and the thousand natural shocks that flesh is heir to: 'tis a consummation devoutly to be wish'd. to die, to sleep; to sleep, perchance to dream -- ay, there's the rub: for in that sleep of death what dreams may come, when we have shuffled off this mortal coil, must give us pause.
all the world's a stage, and all the men and women merely players; they have their exits and their entrances, and one man in his time plays many parts, his acts being seven ages.
tyger tyger, burning bright, in the forests of the night; what immortal hand or eye, could frame thy fearful symmetry? in what distant deeps or skies, burnt the fire of thine eyes? on what wings dare he aspire? what the hand, dare seize the fire? and what shoulder, and what art, could twist the sinews of thy heart? and when thy heart began to beat, what dread hand? and what dread feet? what the hammer? what the chain, in what furnace was thy brain? what the anvil? what dread grasp, dare its deadly terrors clasp? when the stars threw down their spears and water'd heaven with their tears: did he smile his work to see? did he who made the lamb make thee? tyger tyger burning bright, in the forests of the night: what immortal hand or eye, dare frame thy fearful symmetry?
hope is the thing with feathers that perches in the soul, and sings the tune without the words, and never stops at all, and sweetest in the gale is heard; and sore must be the storm that could abash the little bird that kept so many warm. i've heard it in the chillest land, and on the strangest sea; yet, never, in extremity, it asked a crumb of me.
because i could not stop for death, he kindly stopped for me; the carriage held but just ourselves and immortality. we slowly drove, he knew no haste, and i had put away my labor, and my leisure too, for his civility.
once upon a midnight dreary, while i pondered, weak and weary, over many a quaint and curious volume of forgotten lore, while i nodded, nearly napping, suddenly there came a tapping, as of some one gently rapping, rapping at my chamber door. 'tis some visitor, i muttered, tapping at my chamber door; only this and nothing more.
ah, distinctly i remember it was in the bleak december; and each separate dying ember wrought its ghost upon the floor. eagerly i wished the morrow; vainly i had sought to borrow from my books surcease of sorrow, sorrow for the lost lenore, for the rare and radiant maiden whom the angels name lenore: nameless here for evermore.
and the silken, sad, uncertain rustling of each purple curtain thrilled me, filled me with fantastic terrors never felt before; so that now, to still the beating of my heart, i stood repeating, 'tis some visitor entreating entrance at my chamber door, some late visitor entreating entrance at my chamber door; this it is and nothing more.
two roads diverged in a yellow wood, and sorry i could not travel both and be one traveler, long i stood and looked down one as far as i could to where it bent in the undergrowth; then took the other, as just as fair, and having perhaps the better claim, because it was grassy and wanted wear; though as for that the passing there had worn them really about the same, and both that morning equally lay in leaves no step had trodden black. oh, i kept the first for another day! yet knowing how way leads on to way, i doubted if i should ever come back. i shall be telling this with a sigh somewhere ages and ages hence: two roads diverged in a wood, and i -- i took the one less traveled by, and that has made all the difference.
whose woods these are i think i know. his house is in the village though; he will not see me stopping here to watch his woods fill up with snow. my little horse must think it queer to stop without a farmhouse near between the woods and frozen lake the darkest evening of the year. he gives his harness bells a shake to ask if there is some mistake. the only other sound's the sweep of easy wind and downy flake. the woods are lovely, dark and deep, but i have promises to keep, and miles to go before i sleep, and miles to go before i sleep.
)";

}  // namespace

std::string_view embedded_corpus() { return kCorpus; }

}  // namespace hlgp
