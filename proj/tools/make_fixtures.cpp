// Regenerates the synthetic trajectory fixtures under data/.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "pitchfork/io.hpp"
#include "pitchfork/taxonomy.hpp"

using namespace pitchfork;

namespace {

void save(TrajectoryLog log, const std::filesystem::path& path) {
  log.config_hash = "synthetic";
  std::ostringstream os;
  write_trajectory_csv(os, log);
  write_text_file(path, os.str());
  const ShapeResult r = classify(log);
  std::cout << path.filename().string() << ": " << to_string(r.shape) << ", descent corr "
            << r.evidence.descent_corr << ", decoupling corr " << r.evidence.decoupling_corr << ", plateau "
            << r.evidence.plateau_fraction << "\n";
}

/// Rising ratio with log10 NC1 at an exact sample correlation `r` to it.
TrajectoryLog decoupled(double r, std::uint64_t seed, int n) {
  Rng rng(seed);
  VectorXd x(n), w(n);
  for (int i = 0; i < n; ++i) {
    x(i) = -1.5 + 3.0 * i / (n - 1.0) + 0.04 * rng.normal();
    w(i) = rng.normal();
  }
  const VectorXd xs = (x.array() - x.mean()).matrix().normalized();
  VectorXd ws = (w.array() - w.mean()).matrix();
  ws -= ws.dot(xs) * xs;
  ws.normalize();
  const VectorXd y = 0.4 * std::sqrt(static_cast<double>(n)) * (r * xs + std::sqrt(1 - r * r) * ws);
  TrajectoryLog log;
  log.experiment = "synthetic_NoArc";
  log.seed = seed;
  for (int i = 0; i < n; ++i) {
    CriticalityReading c;
    c.step = i;
    c.log_beta_c = -1;
    c.log_beta = -1 + x(i);
    c.log_ratio = c.log_beta - c.log_beta_c;
    c.nc1 = std::pow(10.0, y(i));
    c.order_parameter = std::max(0.0, x(i));
    log.readings.push_back(c);
  }
  return log;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
  try {
    save(synthesize_trajectory(ShapeClass::FullV, 1125), dir / "exemplar_full_v.synthetic.csv");
    save(synthesize_trajectory(ShapeClass::FoldBack, 833), dir / "exemplar_fold_back.synthetic.csv");
    save(decoupled(-0.48, 20240611, 400), dir / "exemplar_no_arc.synthetic.csv");
    save(synthesize_trajectory(ShapeClass::DelayedEscape, 7), dir / "delayed_escape.synthetic.csv");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
  return 0;
}
