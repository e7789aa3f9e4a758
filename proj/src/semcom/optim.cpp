#include "semcom/optim.hpp"

#include <algorithm>
#include <cmath>

#include "semcom/error.hpp"
#include "semcom/rng.hpp"

namespace semcom {

void adam_step(ParameterSet& params, const AdamConfig& cfg, std::uint64_t step) {
  require(cfg.lr > 0.0, ErrorCode::kInvalidArgument, "adam: learning rate must be positive");
  require(step >= 1, ErrorCode::kInvalidArgument, "adam: step index starts at 1");
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (Parameter& p : params) {
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = p.m.data();
    auto v = p.v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      w[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
}

GradCheckResult grad_check(ParameterSet& params, const LossClosure& loss, std::uint64_t seed,
                           std::size_t samples, double step) {
  params.zero_grad();
  std::uint64_t base_sig = 0;
  {
    ad::Tape tape;
    ad::Var l = loss(tape);
    base_sig = tape.branch_signature();
    tape.backward(l);
  }

  struct Coord {
    std::size_t param, index;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].value.size(); ++i) coords.push_back({p, i});
  Rng rng(seed, "grad_check");
  rng.shuffle(std::span(coords));

  auto eval = [&](std::uint64_t& sig) {
    ad::Tape tape;
    const double v = loss(tape).value().item();
    sig = tape.branch_signature();
    return v;
  };

  GradCheckResult res;
  for (const Coord& c : coords) {
    if (res.checked >= samples) break;
    double& w = params[c.param].value[c.index];
    const double analytic = params[c.param].grad[c.index];
    const double saved = w;
    std::uint64_t sp = 0, sm = 0;
    w = saved + step;
    const double fp = eval(sp);
    w = saved - step;
    const double fm = eval(sm);
    w = saved;
    if (sp != base_sig || sm != base_sig) {
      ++res.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
    ++res.checked;
  }
  return res;
}

}  // namespace semcom
