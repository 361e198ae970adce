#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace icl {

// General: N, r, s, delta form. Besov: approximation, context and task terms.
// Entropy: covering-number terms. BesovTau: Besov with the tau-dependent task term.
enum class BoundFamily { General, Besov, Entropy, BesovTau };

std::string_view bound_family_name(BoundFamily f);
BoundFamily parse_bound_family(std::string_view text);

// Shapes of the risk bounds; every term carries a multiplicative constant,
// looked up by term name and defaulting to 1.
struct BoundInputs {
  double N = 2.0;
  double n = 1.0;
  double T = 1.0;
  double r = 0.5;
  double s = 1.0;
  double delta = 0.0;
  double eps = 1.0;
  double radius = 1.0;
  double alpha = 1.0;
  double d = 1.0;
  double tau = 1.0;
  std::map<std::string, double, std::less<>> constants;

  double constant(std::string_view term) const;
};

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct BoundReport {
  std::vector<BoundTerm> terms;
  double total = 0.0;
};

BoundReport bound_terms(const BoundInputs& inputs, BoundFamily family);

}  // namespace icl
