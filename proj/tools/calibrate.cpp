// Offline calibration aid: runs many in-process batches of a config and
// reports how the condition means and paired tests are distributed.
//
//   calibrate --config configs/paper_cal.json --reps 400 --seed-base 100000

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "statebridge/error.hpp"
#include "statebridge/experiment.hpp"

namespace sb = statebridge;

namespace {

struct Target {
  const char* metric;
  double hidden;
  double external;
};

constexpr Target kTargets[] = {
    {"Init (s)", 33.47, 49.93},
    {"Exec (s)", 162.63, 137.33},
    {"Total (s)", 196.10, 187.26},
};

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol * target; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution of batch statistics over many seeds"};
  std::string config_path;
  int reps = 200;
  std::uint64_t seed_base = 100000;
  double tolerance = 0.10;
  app.add_option("--config", config_path)->check(CLI::ExistingFile);
  app.add_option("--reps", reps);
  app.add_option("--seed-base", seed_base);
  app.add_option("--tolerance", tolerance);
  CLI11_PARSE(app, argc, argv);

  try {
    auto config = config_path.empty() ? sb::ExperimentConfig{} : sb::load_experiment_config(config_path);
    config.server.default_user = config.user;

    std::vector<double> sums(6, 0.0);
    std::vector<double> sds(6, 0.0);
    int means_ok = 0;
    int pattern_ok = 0;
    int init_sig = 0;
    int total_ns = 0;
    double success_a = 0, success_b = 0, grasp_a = 0, grasp_b = 0;
    std::vector<int> window_hits(6, 0);
    for (int r = 0; r < reps; ++r) {
      config.seed = seed_base + static_cast<std::uint64_t>(r);
      const auto report = sb::aggregate_report(sb::simulate_batch(config));
      bool all_in = true;
      for (int m = 0; m < 3; ++m) {
        const auto& row = report.row(kTargets[m].metric);
        sums[2 * m] += row.hidden.mean;
        sums[2 * m + 1] += row.external.mean;
        sds[2 * m] += row.hidden.sd;
        sds[2 * m + 1] += row.external.sd;
        const bool a = within(row.hidden.mean, kTargets[m].hidden, tolerance);
        const bool b = within(row.external.mean, kTargets[m].external, tolerance);
        window_hits[2 * m] += a;
        window_hits[2 * m + 1] += b;
        all_in = all_in && a && b;
      }
      means_ok += all_in;
      const bool i_sig = report.row("Init (s)").test.p_two_sided < 0.001;
      const bool t_ns = report.row("Total (s)").test.p_two_sided > 0.05;
      init_sig += i_sig;
      total_ns += t_ns;
      pattern_ok += i_sig && t_ns;
      success_a += report.success_rate_hidden;
      success_b += report.success_rate_external;
      grasp_a += report.row("Grasp Att.").hidden.mean;
      grasp_b += report.row("Grasp Att.").external.mean;
    }
    const double n = reps;
    std::printf("%-10s %10s %10s %10s %10s   in-window A / B\n", "metric", "A mean", "A sd", "B mean", "B sd");
    for (int m = 0; m < 3; ++m) {
      std::printf("%-10s %10.2f %10.2f %10.2f %10.2f   %.3f / %.3f\n", kTargets[m].metric, sums[2 * m] / n,
                  sds[2 * m] / n, sums[2 * m + 1] / n, sds[2 * m + 1] / n, window_hits[2 * m] / n,
                  window_hits[2 * m + 1] / n);
    }
    std::printf("grasp      %10.2f %21.2f\n", grasp_a / n, grasp_b / n);
    std::printf("success    %10.3f %21.3f\n", success_a / n, success_b / n);
    const double q = pattern_ok / n;
    // P(at least 9 of 10 independent replications show the pattern).
    const double nine_of_ten = std::pow(q, 10) + 10 * std::pow(q, 9) * (1 - q);
    std::printf("all means in window: %.3f\n", means_ok / n);
    std::printf("init p<0.001: %.3f  total p>0.05: %.3f  both: %.3f  -> P(>=9/10) = %.3f\n", init_sig / n,
                total_ns / n, q, nine_of_ten);
    std::printf("joint estimate: %.3f\n", (means_ok / n) * nine_of_ten);
  } catch (const sb::Error& e) {
    std::cerr << "calibrate: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
