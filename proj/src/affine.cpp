// SPDX-License-Identifier: Apache-2.0

#include "certrom/affine.hpp"

#include <cmath>
#include <type_traits>
#include <ostream>
#include <sstream>

namespace certrom {

int total_order(const MultiIndex& alpha) {
  int n = 0;
  for (int a : alpha) n += a;
  return n;
}

std::vector<int> to_directions(const MultiIndex& alpha) {
  std::vector<int> dirs;
  for (int v = 0; v < static_cast<int>(alpha.size()); ++v) {
    for (int k = 0; k < alpha[v]; ++k) dirs.push_back(v);
  }
  return dirs;
}

MultiIndex unit_index(int num_vars, int var, int order) {
  MultiIndex alpha(num_vars, 0);
  alpha.at(var) = order;
  return alpha;
}

std::vector<MultiIndex> nonzero_sub_indices(const MultiIndex& alpha) {
  std::vector<MultiIndex> out{MultiIndex(alpha.size(), 0)};
  for (std::size_t v = 0; v < alpha.size(); ++v) {
    std::vector<MultiIndex> next;
    for (const auto& beta : out) {
      for (int k = 0; k <= alpha[v]; ++k) {
        MultiIndex b = beta;
        b[v] = k;
        next.push_back(std::move(b));
      }
    }
    out = std::move(next);
  }
  out.erase(out.begin());  // the all-zero index is generated first
  return out;
}

double multi_binomial(const MultiIndex& alpha, const MultiIndex& beta) {
  double c = 1.0;
  for (std::size_t v = 0; v < alpha.size(); ++v) {
    int n = alpha[v];
    int k = beta[v];
    double b = 1.0;
    for (int j = 1; j <= k; ++j) b = b * (n - k + j) / j;
    c *= b;
  }
  return c;
}

MultiIndex subtract(const MultiIndex& alpha, const MultiIndex& beta) {
  MultiIndex out(alpha.size());
  for (std::size_t v = 0; v < alpha.size(); ++v) out[v] = alpha[v] - beta[v];
  return out;
}

std::string to_string(const MultiIndex& alpha) {
  std::ostringstream os;
  os << '(';
  for (std::size_t v = 0; v < alpha.size(); ++v) os << (v ? "," : "") << alpha[v];
  os << ')';
  return os.str();
}

ThetaFunction ThetaFunction::constant(double value) {
  std::ostringstream desc;
  desc.precision(17);
  desc << value;
  return make(desc.str(), [value](auto x) {
    using T = std::remove_const_t<typename decltype(x)::element_type>;
    T r = T(value);
    return r;
  });
}

template <class T>
double ThetaFunction::eval_seeded(const std::function<T(std::span<const T>)>& f, std::span<const double> x,
                                  std::span<const int> dirs) const {
  std::vector<T> vars(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) vars[i] = detail::seed_variable<T>(x[i], static_cast<int>(i), dirs);
  return detail::extract_derivative(f(std::span<const T>(vars)));
}

double ThetaFunction::derivative(std::span<const double> x, const MultiIndex& alpha) const {
  if (alpha.size() != x.size()) throw InvalidInput("theta derivative: multi-index has wrong length");
  std::vector<int> dirs = to_directions(alpha);
  switch (dirs.size()) {
    case 0: return value(x);
    case 1: return eval_seeded<D1>(f1_, x, dirs);
    case 2: return eval_seeded<D2>(f2_, x, dirs);
    case 3: return eval_seeded<D3>(f3_, x, dirs);
    default:
      throw InvalidInput("theta derivative of total order " + std::to_string(dirs.size()) + " is not supported");
  }
}

int AffineOperator::dimension() const { return terms.empty() ? 0 : static_cast<int>(terms.front().component.rows()); }

SparseMatrix AffineOperator::evaluate(std::span<const double> x) const {
  SparseMatrix k(dimension(), dimension());
  for (const auto& term : terms) {
    double w = term.theta.value(x);
    if (w != 0.0) k += w * term.component;
  }
  return k;
}

SparseMatrix AffineOperator::derivative(std::span<const double> x, const MultiIndex& alpha) const {
  SparseMatrix k(dimension(), dimension());
  for (const auto& term : terms) {
    double w = term.theta.derivative(x, alpha);
    if (w != 0.0) k += w * term.component;
  }
  return k;
}

Vector AffineOperator::apply(std::span<const double> x, const MultiIndex& alpha, const Vector& v) const {
  Vector out = Vector::Zero(dimension());
  for (const auto& term : terms) {
    double w = term.theta.derivative(x, alpha);
    if (w != 0.0) out += w * (term.component * v);
  }
  return out;
}

Eigen::MatrixXd AffineOperator::block_tensor(int block, std::span<const double> x, const MultiIndex& alpha) const {
  const auto& b = blocks.at(block);
  auto th = [&](int k) { return terms.at(b.terms.at(k)).theta.derivative(x, alpha); };
  if (b.dim == 1) return Eigen::MatrixXd::Constant(1, 1, th(0));
  Eigen::MatrixXd c(2, 2);
  c << th(0), th(1), th(1), th(2);
  return c;
}

Vector AffineFunctional::evaluate(std::span<const double> x) const {
  Vector f = Vector::Zero(terms.empty() ? 0 : terms.front().component.size());
  for (const auto& term : terms) f += term.theta.value(x) * term.component;
  return f;
}

Vector AffineFunctional::derivative(std::span<const double> x, const MultiIndex& alpha) const {
  Vector f = Vector::Zero(terms.empty() ? 0 : terms.front().component.size());
  for (const auto& term : terms) {
    double w = term.theta.derivative(x, alpha);
    if (w != 0.0) f += w * term.component;
  }
  return f;
}

std::vector<double> AffineModel::variables(std::span<const double> p, std::span<const double> phi) const {
  if (static_cast<int>(p.size()) != num_design) {
    throw InvalidInput("expected " + std::to_string(num_design) + " design parameters, got " + std::to_string(p.size()));
  }
  if (static_cast<int>(phi.size()) != num_uncertain) {
    throw InvalidInput("expected " + std::to_string(num_uncertain) + " uncertain parameters, got " +
                       std::to_string(phi.size()));
  }
  std::vector<double> x(p.begin(), p.end());
  x.insert(x.end(), phi.begin(), phi.end());
  return x;
}

namespace {

std::vector<std::string> violations(const AffineModel& model, std::span<const double> p) {
  std::vector<std::string> out;
  if (static_cast<int>(p.size()) != model.num_design) {
    out.push_back("wrong number of design parameters");
    return out;
  }
  for (int i = 0; i < model.num_design; ++i) {
    std::string name = i < static_cast<int>(model.design_names.size()) ? model.design_names[i] : "p" + std::to_string(i + 1);
    if (!std::isfinite(p[i])) out.push_back(name + " is not finite");
    if (p[i] < model.lower[i]) out.push_back(name + " = " + std::to_string(p[i]) + " < " + std::to_string(model.lower[i]));
    if (p[i] > model.upper[i]) out.push_back(name + " = " + std::to_string(p[i]) + " > " + std::to_string(model.upper[i]));
  }
  for (const auto& lb : model.linear_bounds) {
    double s = 0.0;
    for (int i = 0; i < model.num_design; ++i) s += lb.coeffs[i] * p[i];
    if (s > lb.rhs) out.push_back(lb.name + " violated (" + std::to_string(s) + " > " + std::to_string(lb.rhs) + ")");
  }
  return out;
}

}  // namespace

void AffineModel::check_admissible(std::span<const double> p) const {
  auto v = violations(*this, p);
  if (v.empty()) return;
  std::string msg = "parameter outside the admissible set:";
  for (const auto& s : v) msg += " [" + s + "]";
  throw InvalidInput(msg);
}

bool AffineModel::is_admissible(std::span<const double> p) const { return violations(*this, p).empty(); }

void check_parameter(const AffineModel& model, std::span<const double> p) {
  model.check_admissible(p);
  std::vector<double> phi(model.num_uncertain, 0.0);
  auto x = model.variables(p, phi);
  MultiIndex zero(model.num_vars(), 0);
  for (int b = 0; b < static_cast<int>(model.stiffness.blocks.size()); ++b) {
    Eigen::MatrixXd c = model.stiffness.block_tensor(b, x, zero);
    bool pd = c.rows() == 1 ? c(0, 0) > 0.0 : (c(0, 0) > 0.0 && c.determinant() > 0.0);
    if (!pd) throw InvalidInput("coefficient block " + std::to_string(b) + " is not positive definite at this parameter");
  }
}

SparseMatrix eval_operator(const AffineModel& model, std::span<const double> p) {
  check_parameter(model, p);
  std::vector<double> phi(model.num_uncertain, 0.0);
  return model.stiffness.evaluate(model.variables(p, phi));
}

SparseMatrix eval_operator_derivative(const AffineModel& model, std::span<const double> p, int i, int order) {
  if (order < 1 || order > 2) throw InvalidInput("unsupported derivative order " + std::to_string(order));
  if (i < 0 || i >= model.num_design) throw InvalidInput("design parameter index out of range");
  model.check_admissible(p);
  std::vector<double> phi(model.num_uncertain, 0.0);
  return model.stiffness.derivative(model.variables(p, phi), unit_index(model.num_vars(), i, order));
}

Vector eval_rhs(const AffineModel& model, std::span<const double> p, std::span<const double> phi) {
  model.check_admissible(p);
  return model.load.evaluate(model.variables(p, phi));
}

Vector eval_rhs_derivative(const AffineModel& model, std::span<const double> p, std::span<const double> phi, int var,
                           int order) {
  if (order < 1 || order > 2) throw InvalidInput("unsupported derivative order " + std::to_string(order));
  if (var < 0 || var >= model.num_vars()) throw InvalidInput("variable index out of range");
  model.check_admissible(p);
  return model.load.derivative(model.variables(p, phi), unit_index(model.num_vars(), var, order));
}

namespace {

void write_triplets(std::ostream& os, const SparseMatrix& m) {
  os << "matrix " << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << "\n";
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
  }
}

}  // namespace

void write_model(std::ostream& os, const AffineModel& model) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "affine_model dofs " << model.dimension() << " design " << model.num_design << " uncertain "
      << model.num_uncertain << "\n";
  buf << "stiffness_terms " << model.stiffness.terms.size() << "\n";
  for (std::size_t q = 0; q < model.stiffness.terms.size(); ++q) {
    buf << "theta " << q << ' ' << model.stiffness.terms[q].theta.descriptor() << "\n";
    write_triplets(buf, model.stiffness.terms[q].component);
  }
  buf << "load_terms " << model.load.terms.size() << "\n";
  for (std::size_t q = 0; q < model.load.terms.size(); ++q) {
    const auto& v = model.load.terms[q].component;
    buf << "theta " << q << ' ' << model.load.terms[q].theta.descriptor() << "\n";
    buf << "vector " << v.size() << "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] != 0.0) buf << i << ' ' << v[i] << "\n";
    }
    buf << "end\n";
  }
  buf << "weight\n";
  write_triplets(buf, model.weight);
  buf << "output " << model.output.size() << "\n";
  for (Eigen::Index i = 0; i < model.output.size(); ++i) {
    if (model.output[i] != 0.0) buf << i << ' ' << model.output[i] << "\n";
  }
  buf << "end\n";
  os << buf.str();
}

}  // namespace certrom
