#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ckrl::cli {

// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "CKRL_OUTPUT_ROOT";
inline constexpr const char* kDefaultOutputRoot = "ckrl-out";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

// Every setting of every subcommand. Each field is reachable as a command-line
// flag and as a config-file key; shared settings live at the top of the
// config file, subcommand settings under a [subcommand] section.
struct RunConfig {
  // Shared
  std::string train_file;
  std::string valid_file;
  std::string test_file;
  std::string column_order = "htr";
  std::string out;  // defaults to $CKRL_OUTPUT_ROOT, else "ckrl-out"
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool quiet = false;

  // make-demo
  std::size_t demo_entities = 120;
  std::size_t demo_relations = 8;
  std::size_t demo_composed = 2;

  // inject-noise
  std::vector<double> ratios{0.1, 0.2, 0.4};

  // precompute-paths, train
  std::string cache_dir;  // empty means <out>/paths
  std::size_t max_fanout = 200;
  double epsilon = 0.01;
  bool reuse_cache = false;

  // train
  std::string variant = "lt";
  std::string norm = "l1";
  std::size_t dim = 50;
  double margin = 1.0;
  double learning_rate = 0.001;
  int epochs = 1000;
  std::size_t batch_size = 4096;
  double alpha = 0.9;
  double beta = 1e-4;
  std::string lambdas = "auto";  // "auto" or "lt,pp,ap"
  double ap_guard = 1e-6;
  std::vector<double> corruption{0.4, 0.4, 0.2};
  std::string init = "random";
  std::string pretrained;
  int checkpoint_every = 0;
  bool fresh_lt_negative = false;

  // evaluate
  std::string checkpoint;  // empty means <out>/checkpoint.bin
  std::vector<std::string> tasks{"noise-detection", "completion", "classification"};
  std::string labels;
  std::string valid_labeled;
  std::string test_labeled;
  bool relation_prediction = false;
};

// Parses arguments and runs one subcommand. Returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace ckrl::cli
