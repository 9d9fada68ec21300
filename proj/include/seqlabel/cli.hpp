#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace seqlabel {

struct RunConfig {
  std::string command;  // check, fit, predict, eval, simulate
  std::string model, votes, params, out;
  std::string method = "closed_form";  // closed_form | sgd
  std::string resolution = "element";  // element, sequence or a 1-based level
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = available cores
  std::optional<double> lr;
  std::optional<int> epochs, batch;
  std::string loss_curve;

  // eval
  std::string labels, gold, baseline;
  double threshold = 0.5;

  // simulate
  std::string experiment = "data";  // data | scaling | sequential
  std::int64_t n = 10000;
  int seeds = 20;
  std::vector<std::int64_t> n_grid{1000, 4000, 16000, 64000};
};

// Executes one command. Errors are reported as a single
// "E_CODE: Kind: detail" line on `err` with exit status 1.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace seqlabel
