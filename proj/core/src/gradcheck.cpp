#include "mmt/gradcheck.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace mmt {

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3);
  for (const auto& p : params) {
    os << (p.max_rel_err <= tol ? "  ok   " : "  FAIL ") << p.name << " max_rel_err="
       << p.max_rel_err << " (coord " << p.worst_coord << ": analytic=" << p.analytic
       << " numeric=" << p.numeric << ")\n";
  }
  os << (pass ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_err << " tol=" << tol << "\n";
  return os.str();
}

GradCheckReport finite_diff_check(const std::function<double()>& f,
                                  const std::vector<std::pair<std::string, TensorPtr>>& params,
                                  double step, double tol) {
  if (!(step > 0.0) || !(tol > 0.0)) fail("config", "finite_diff_check: step and tol must be > 0");
  const double first = f();
  if (f() != first) {
    fail("domain", "finite_diff_check: f is not deterministic under repeated evaluation");
  }

  GradCheckReport report;
  report.tol = tol;
  for (const auto& [name, p] : params) {
    if (p->grad.size() != p->data.size()) {
      fail("shape", "finite_diff_check: parameter '" + name + "' has no analytic gradient");
    }
    GradCheckEntry entry;
    entry.name = name;
    for (std::size_t i = 0; i < p->data.size(); ++i) {
      const double saved = p->data[i];
      p->data[i] = saved + step;
      const double fp = f();
      p->data[i] = saved - step;
      const double fm = f();
      p->data[i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double an = p->grad[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      if (rel >= entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_coord = i;
        entry.analytic = an;
        entry.numeric = fd;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.params.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace mmt
