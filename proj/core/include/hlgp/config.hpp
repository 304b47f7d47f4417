#pragma once

#include <filesystem>
#include <string>

#include "hlgp/tasks.hpp"
#include "hlgp/train.hpp"

namespace hlgp {

struct RunConfig {
  TaskConfig task;
  PipelineConfig pipeline;
  std::string output_dir;

  bool operator==(const RunConfig& other) const = default;
};

// JSON object with optional sections "task", "cell", "schedule",
// "optimizer", "lr_schedule", "training" plus top-level "seed" and
// "output_dir". Missing keys keep their defaults; unknown keys are errors.
// The result is validated.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
// Canonical form: every key present, parse(dump(c)) == c.
std::string dump_run_config(const RunConfig& config);

// Task input/output widths implied by the task section.
std::size_t task_input_width(const TaskConfig& task);
std::size_t task_output_width(const TaskConfig& task);

// Ranges, enum names and cross-section width consistency.
void validate(const RunConfig& config);

}  // namespace hlgp
