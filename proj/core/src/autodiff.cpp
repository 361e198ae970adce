#include "icl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace icl::ad {

Var Tape::push(Tensor value, bool requires_grad, Backward backward) {
  if (!value.all_finite()) {
    throw NonFiniteError("autodiff: non-finite value at node " + std::to_string(nodes_.size()));
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return &n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Tensor::zeros_like(n.value);
}

void Tape::backward(Var output) {
  if (value(output).size() != 1) throw std::invalid_argument("Tape::backward: output must be scalar");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Tensor* seed = grad_slot(output.id());
  if (!seed) return;
  (*seed)[0] = 1.0;
  for (std::size_t id = output.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (!n.grad.all_finite()) {
      throw NonFiniteError("autodiff: non-finite gradient at node " + std::to_string(id));
    }
    if (n.backward) n.backward(*this, id);
  }
}

namespace {

void check_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("autodiff: operands on different tapes");
}

void check_same_shape(Var a, Var b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_string() +
                                " vs " + b.value().shape_string());
  }
}

bool needs(Var a) { return a.tape().requires_grad(a); }
bool needs(Var a, Var b) { return needs(a) || needs(b); }

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ " + av.shape_string() + " x " +
                                bv.shape_string());
  }
  Tensor out({av.rows(), bv.cols()});
  out.mat().noalias() = av.mat() * bv.mat();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), needs(a, b), [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    if (Tensor* ga = t.grad_slot(ia)) ga->mat().noalias() += g.mat() * t.value(ib).mat().transpose();
    if (Tensor* gb = t.grad_slot(ib)) gb->mat().noalias() += t.value(ia).mat().transpose() * g.mat();
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  Tensor out({av.cols(), av.rows()});
  out.mat() = av.mat().transpose();
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    if (Tensor* ga = t.grad_slot(ia)) ga->mat() += g.mat().transpose();
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  out.mat() += b.value().mat();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), needs(a, b), [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    if (Tensor* ga = t.grad_slot(ia)) ga->mat() += g.mat();
    if (Tensor* gb = t.grad_slot(ib)) gb->mat() += g.mat();
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  out.mat() -= b.value().mat();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), needs(a, b), [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    if (Tensor* ga = t.grad_slot(ia)) ga->mat() += g.mat();
    if (Tensor* gb = t.grad_slot(ib)) gb->mat() -= g.mat();
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  out.mat().array() *= b.value().mat().array();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), needs(a, b), [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    if (Tensor* ga = t.grad_slot(ia)) ga->mat().array() += g.mat().array() * t.value(ib).mat().array();
    if (Tensor* gb = t.grad_slot(ib)) gb->mat().array() += g.mat().array() * t.value(ia).mat().array();
  });
}

Var add_row_bias(Var a, Var bias) {
  check_same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.size() != av.cols()) {
    throw std::invalid_argument("add_row_bias: bias " + bv.shape_string() + " does not match " +
                                av.shape_string());
  }
  Tensor out = av;
  const Eigen::Map<const Eigen::RowVectorXd> b(bv.data(), static_cast<Eigen::Index>(bv.size()));
  out.mat().rowwise() += b;
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape().push(std::move(out), needs(a, bias), [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    if (Tensor* ga = t.grad_slot(ia)) ga->mat() += g.mat();
    if (Tensor* gb = t.grad_slot(ib)) {
      Eigen::Map<Eigen::RowVectorXd> db(gb->data(), static_cast<Eigen::Index>(gb->size()));
      db += g.mat().colwise().sum();
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  out.mat() *= c;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia, c](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    if (Tensor* ga = t.grad_slot(ia)) ga->mat() += c * g.mat();
  });
}

Var square(Var a) { return mul(a, a); }

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    Tensor* ga = t.grad_slot(ia);
    if (!ga) return;
    const Tensor& x = t.value(ia);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) (*ga)[i] += g[i];
    }
  });
}

Var softmax_rows(Var a) {
  Tensor out = a.value();
  auto m = out.mat();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double top = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - top).exp();
    m.row(r) /= m.row(r).sum();
  }
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    Tensor* ga = t.grad_slot(ia);
    if (!ga) return;
    const auto p = t.value(self).mat();
    const auto gm = g.mat();
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double inner = gm.row(r).dot(p.row(r));
      ga->mat().row(r).array() += p.row(r).array() * (gm.row(r).array() - inner);
    }
  });
}

Var clip(Var a, double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("clip: bound must be positive");
  Tensor out = a.value();
  for (double& v : out.values()) v = std::clamp(v, -bound, bound);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia, bound](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    Tensor* ga = t.grad_slot(ia);
    if (!ga) return;
    const Tensor& x = t.value(ia);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > -bound && x[i] < bound) (*ga)[i] += g[i];
    }
  });
}

Var radial_project_rows(Var a, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("radial_project_rows: radius must be positive");
  Tensor out = a.value();
  auto m = out.mat();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (norm > radius) m.row(r) *= radius / norm;
  }
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia, radius](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    Tensor* ga = t.grad_slot(ia);
    if (!ga) return;
    const auto x = t.value(ia).mat();
    const auto gm = g.mat();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double norm = x.row(r).norm();
      if (norm > radius) {
        // d(R v / |v|) = (R / |v|) (I - v v^T / |v|^2)
        const double vg = x.row(r).dot(gm.row(r));
        ga->mat().row(r) += (radius / norm) * (gm.row(r) - (vg / (norm * norm)) * x.row(r));
      } else {
        ga->mat().row(r) += gm.row(r);
      }
    }
  });
}

Var sum(Var a) {
  const double s = a.value().mat().sum();
  const std::size_t ia = a.id();
  return a.tape().push(Tensor::scalar(s), needs(a), [ia](Tape& t, std::size_t self) {
    const double g = (*t.grad_slot(self))[0];
    if (Tensor* ga = t.grad_slot(ia)) ga->mat().array() += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.rows() || count == 0) throw std::out_of_range("rows: range outside matrix");
  const std::size_t c = av.cols();
  Tensor out({count, c});
  std::copy_n(av.data() + begin * c, count * c, out.data());
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia, begin, count, c](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_slot(self);
    Tensor* ga = t.grad_slot(ia);
    if (!ga) return;
    for (std::size_t i = 0; i < count * c; ++i) (*ga)[begin * c + i] += g[i];
  });
}

Var element(Var a, std::size_t r, std::size_t c) {
  const Tensor& av = a.value();
  if (r >= av.rows() || c >= av.cols()) throw std::out_of_range("element: index outside matrix");
  const std::size_t pos = r * av.cols() + c;
  const std::size_t ia = a.id();
  return a.tape().push(Tensor::scalar(av[pos]), needs(a), [ia, pos](Tape& t, std::size_t self) {
    const double g = (*t.grad_slot(self))[0];
    if (Tensor* ga = t.grad_slot(ia)) (*ga)[pos] += g;
  });
}

}  // namespace icl::ad
