// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "placekit/json_util.hpp"
#include "placekit/planner.hpp"

namespace placekit {

/// Every tunable the pipeline exposes, loadable from one JSON document
/// (strict keys, schema_version 1) and overridable by command-line flags
/// (flags win). workers == 0 means "use all available cores".
struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;
  bool verbose = false;

  PlannerConfig planner;  ///< schedule, guidance weights, grid, k_a
  int n_candidates = 8;

  double crossover_rate = 1.0;
  double mutation_rate = 0.3;
  double similarity_threshold = 0.4;

  int refine_steps = 10;
  double refine_step_size = 0.01;
  double refine_reg_weight = 10.0;

  int n_plans = 1;

  void validate() const;
};

RunConfig run_config_from_json(const json& j);
json run_config_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

/// Entry point behind main(): parses the subcommand, dispatches, and turns
/// any failure into a machine-readable error JSON on stderr plus a nonzero
/// exit code.
int run_cli(int argc, char** argv);

}  // namespace placekit
