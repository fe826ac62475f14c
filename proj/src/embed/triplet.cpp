#include "glee/embed/triplet.hpp"

#include <cmath>

#include "glee/common/error.hpp"

namespace glee::embed {

namespace {

// x / |x| to within a few units of 2^-100 before the final rounding, using
// fma-based double-double sums. Exactly scaled inputs (k x representable)
// therefore normalize to identical doubles.
std::vector<double> normalized(std::span<const double> x, double& norm) {
  double hi = 0.0, lo = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericalError("triplet loss: non-finite embedding");
    const double p = v * v;
    const double pe = std::fma(v, v, -p);
    const double t = hi + p;
    const double z = t - hi;
    lo += (hi - (t - z)) + (p - z) + pe;
    hi = t;
  }
  const double s_hi = hi + lo;
  const double s_lo = lo - (s_hi - hi);
  if (!(s_hi > 0.0)) throw NumericalError("triplet loss: cannot normalize a zero embedding");
  const double r = std::sqrt(s_hi);
  const double r_lo = (std::fma(-r, r, s_hi) + s_lo) / (2.0 * r);
  norm = r + r_lo;
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double q = x[i] / r;
    const double rem = std::fma(-q, r, x[i]) - q * r_lo;
    u[i] = q + rem / r;
  }
  return u;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Gradient through x -> x / |x|.
std::vector<double> through_norm(const std::vector<double>& u, const std::vector<double>& g,
                                 double norm) {
  double ug = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) ug += u[i] * g[i];
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = (g[i] - u[i] * ug) / norm;
  return out;
}

}  // namespace

double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin, TripletGrad* grad) {
  if (!(margin > 0.0)) throw ConfigError("triplet loss: margin must be positive");
  if (anchor.size() != positive.size() || anchor.size() != negative.size() || anchor.empty()) {
    throw ValidationError("triplet loss: embeddings must have equal non-zero length");
  }
  double na = 0.0, np = 0.0, nn = 0.0;
  const std::vector<double> a = normalized(anchor, na);
  const std::vector<double> p = normalized(positive, np);
  const std::vector<double> n = normalized(negative, nn);
  const double d_ap = sq_dist(a, p);
  const double h1 = d_ap - sq_dist(a, n) + margin;
  const double h2 = d_ap - sq_dist(p, n) + margin;
  const double loss = std::max(0.0, h1) + std::max(0.0, h2);

  if (grad != nullptr) {
    const std::size_t d = a.size();
    std::vector<double> ga(d, 0.0), gp(d, 0.0), gn(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      if (h1 > 0.0) {
        ga[i] += 2.0 * (a[i] - p[i]) - 2.0 * (a[i] - n[i]);
        gp[i] -= 2.0 * (a[i] - p[i]);
        gn[i] += 2.0 * (a[i] - n[i]);
      }
      if (h2 > 0.0) {
        ga[i] += 2.0 * (a[i] - p[i]);
        gp[i] += -2.0 * (a[i] - p[i]) - 2.0 * (p[i] - n[i]);
        gn[i] += 2.0 * (p[i] - n[i]);
      }
    }
    grad->anchor = through_norm(a, ga, na);
    grad->positive = through_norm(p, gp, np);
    grad->negative = through_norm(n, gn, nn);
  }
  return loss;
}

nn::Var triplet_loss(nn::Var anchor, nn::Var positive, nn::Var negative, double margin) {
  auto widen = [](const nn::Var& v) {
    const auto vals = v.value().values();
    return std::vector<double>(vals.begin(), vals.end());
  };
  const std::vector<double> a = widen(anchor), p = widen(positive), n = widen(negative);
  if (anchor.value().rank() != 1 || anchor.shape() != positive.shape() ||
      anchor.shape() != negative.shape()) {
    throw ValidationError("triplet loss: expected three equal-length vectors");
  }
  TripletGrad g;
  const double loss = triplet_loss(a, p, n, margin, &g);
  const int ia = anchor.id(), ip = positive.id(), in = negative.id();
  return anchor.tape().record(
      nn::Tensor({1}, static_cast<float>(loss)), {anchor, positive, negative},
      [ia, ip, in, g = std::move(g)](nn::Tape& t, int self) {
        const float seed = t.grad(self)[0];
        auto push = [&](int id, const std::vector<double>& gv) {
          if (nn::Tensor* sink = t.grad_sink(id)) {
            for (std::size_t i = 0; i < gv.size(); ++i) (*sink)[i] += seed * static_cast<float>(gv[i]);
          }
        };
        push(ia, g.anchor);
        push(ip, g.positive);
        push(in, g.negative);
      });
}

}  // namespace glee::embed
