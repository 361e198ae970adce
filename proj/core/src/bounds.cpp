#include "icl/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace icl {

std::string_view bound_family_name(BoundFamily f) {
  switch (f) {
    case BoundFamily::General:
      return "general";
    case BoundFamily::Besov:
      return "besov";
    case BoundFamily::Entropy:
      return "entropy";
    case BoundFamily::BesovTau:
      return "besov_tau";
  }
  return "?";
}

BoundFamily parse_bound_family(std::string_view text) {
  if (text == "general") return BoundFamily::General;
  if (text == "besov") return BoundFamily::Besov;
  if (text == "entropy") return BoundFamily::Entropy;
  if (text == "besov_tau") return BoundFamily::BesovTau;
  throw std::invalid_argument("unknown bound family '" + std::string(text) + "'");
}

double BoundInputs::constant(std::string_view term) const {
  const auto it = constants.find(term);
  return it == constants.end() ? 1.0 : it->second;
}

BoundReport bound_terms(const BoundInputs& in, BoundFamily family) {
  if (!(in.N >= 2.0)) throw std::invalid_argument("bound_terms: N must be >= 2");
  const auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("bound_terms: ") + what + " must be positive");
  };
  const double N = in.N;
  const double logN = std::log(N);
  BoundReport rep;
  const auto term = [&](const char* name, double value) {
    rep.terms.push_back({name, in.constant(name) * value});
  };
  switch (family) {
    case BoundFamily::General:
      positive(in.n, "n");
      positive(in.r, "r");
      positive(in.s, "s");
      if (in.delta < 0.0) throw std::invalid_argument("bound_terms: delta must be >= 0");
      term("N^{2r}logN/n", std::pow(N, 2.0 * in.r) * logN / in.n);
      term("N^{4r}log^2N/n^2", std::pow(N, 4.0 * in.r) * logN * logN / (in.n * in.n));
      term("N/n", N / in.n);
      term("N^{-2s}", std::pow(N, -2.0 * in.s));
      term("N^2delta^4", N * N * std::pow(in.delta, 4.0));
      term("N^{2r+1}delta^2", std::pow(N, 2.0 * in.r + 1.0) * in.delta * in.delta);
      break;
    case BoundFamily::Besov:
      positive(in.n, "n");
      positive(in.T, "T");
      positive(in.alpha, "alpha");
      positive(in.d, "d");
      term("N^{-2alpha/d}", std::pow(N, -2.0 * in.alpha / in.d));
      term("NlogN/n", N * logN / in.n);
      term("N^2logN/T", N * N * logN / in.T);
      break;
    case BoundFamily::Entropy:
      positive(in.eps, "eps");
      positive(in.radius, "radius");
      positive(in.delta, "delta");
      term("N^2log(B'^2/eps)", N * N * std::log(in.radius * in.radius / in.eps));
      term("Nlog(N/(delta*eps))", N * std::log(N / (in.delta * in.eps)));
      break;
    case BoundFamily::BesovTau:
      positive(in.n, "n");
      positive(in.T, "T");
      positive(in.alpha, "alpha");
      positive(in.d, "d");
      positive(in.tau, "tau");
      term("N^{-2alpha/d}", std::pow(N, -2.0 * in.alpha / in.d));
      term("NlogN/n", N * logN / in.n);
      term("N^{1+alpha/tau+d/tau}log^3N/T",
           std::pow(N, 1.0 + in.alpha / in.tau + in.d / in.tau) * logN * logN * logN / in.T);
      break;
  }
  for (const auto& t : rep.terms) rep.total += t.value;
  return rep;
}

}  // namespace icl
