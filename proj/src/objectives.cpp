#include "trigs/objectives.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "text_util.hpp"
#include "trigs/errors.hpp"

namespace trigs {

Vector Objective::gradient(const Vector& x) const {
  if (!grad) throw MissingCapability("objective '" + name + "': gradient absent");
  return grad(x);
}

Vector Objective::proximal(double theta, const Vector& x) const {
  if (!prox) throw MissingCapability("objective '" + name + "': proximal map absent");
  return prox(theta, x);
}

double Objective::gap(const Vector& x) const {
  if (!known_min_value) return std::nan("");
  return eval(x) - *known_min_value;
}

double Objective::dist_min_norm(const Vector& x) const {
  if (!known_min_norm_solution) return std::nan("");
  return (x - *known_min_norm_solution).norm();
}

namespace {

struct LeastSquaresData {
  Matrix A;
  Vector b;
  Matrix AtA;
  Vector Atb;
};

}  // namespace

Objective make_least_squares(const Matrix& A, const Vector& b) {
  if (A.rows() != b.size()) {
    throw InvalidArgument("least squares: A has " + std::to_string(A.rows()) +
                          " rows but b has " + std::to_string(b.size()) + " entries");
  }
  if (A.size() == 0 || A.cwiseAbs().maxCoeff() == 0.0) {
    throw InvalidArgument("least squares: A must be nonzero");
  }

  auto data = std::make_shared<LeastSquaresData>();
  data->A = A;
  data->b = b;
  data->AtA = A.transpose() * A;
  data->Atb = A.transpose() * b;

  Objective obj;
  obj.name = "least_squares";
  obj.dim = static_cast<int>(A.cols());
  obj.eval = [data](const Vector& x) { return 0.5 * (data->A * x - data->b).squaredNorm(); };
  obj.grad = [data](const Vector& x) -> Vector {
    return data->A.transpose() * (data->A * x - data->b);
  };
  obj.prox = [data](double theta, const Vector& z) -> Vector {
    const auto n = data->AtA.rows();
    const Matrix H = Matrix::Identity(n, n) + theta * data->AtA;
    return H.ldlt().solve(z + theta * data->Atb);
  };

  Eigen::SelfAdjointEigenSolver<Matrix> eig(data->AtA, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  obj.strong_convexity = lo > 1e-12 * hi ? lo : 0.0;

  const Vector xs = A.completeOrthogonalDecomposition().solve(b);
  obj.known_min_norm_solution = xs;
  obj.known_min_value = obj.eval(xs);
  return obj;
}

Vector soft_threshold(const Vector& x, double tau) {
  return x.unaryExpr([tau](double v) {
    if (v > tau) return v - tau;
    if (v < -tau) return v + tau;
    return 0.0;
  });
}

Objective make_abs(int dim) {
  if (dim <= 0) throw InvalidArgument("abs: dimension must be positive");
  Objective obj;
  obj.name = "abs";
  obj.dim = dim;
  obj.eval = [](const Vector& x) { return x.lpNorm<1>(); };
  obj.prox = [](double theta, const Vector& x) { return soft_threshold(x, theta); };
  obj.known_min_value = 0.0;
  obj.known_min_norm_solution = Vector::Zero(dim);
  return obj;
}

Objective make_zero(int dim) {
  if (dim <= 0) throw InvalidArgument("zero: dimension must be positive");
  Objective obj;
  obj.name = "zero";
  obj.dim = dim;
  obj.eval = [](const Vector&) { return 0.0; };
  obj.grad = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  obj.prox = [](double, const Vector& x) { return x; };
  obj.known_min_value = 0.0;
  obj.known_min_norm_solution = Vector::Zero(dim);
  return obj;
}

Objective make_shifted(const Objective& f, const Vector& offset) {
  if (offset.size() != f.dim) throw InvalidArgument("shift: dimension mismatch");
  Objective g;
  g.name = f.name + "+shift";
  g.dim = f.dim;
  g.eval = [f, offset](const Vector& x) { return f.eval(x + offset); };
  if (f.grad) g.grad = [f, offset](const Vector& x) -> Vector { return f.grad(x + offset); };
  if (f.prox) {
    g.prox = [f, offset](double theta, const Vector& x) -> Vector {
      return f.prox(theta, x + offset) - offset;
    };
  }
  g.strong_convexity = f.strong_convexity;
  g.known_min_value = f.known_min_value;
  if (f.known_min_norm_solution && offset.isZero(0.0)) {
    g.known_min_norm_solution = f.known_min_norm_solution;
  }
  return g;
}

double grad_check(const Objective& obj, std::span<const Vector> points, double step) {
  if (!obj.smooth()) throw MissingCapability("grad_check: gradient absent");
  double worst = 0.0;
  for (const auto& x : points) {
    const Vector g = obj.grad(x);
    Vector xp = x;
    Vector xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xp[i] = x[i] + step;
      xm[i] = x[i] - step;
      const double fd = (obj.eval(xp) - obj.eval(xm)) / (2.0 * step);
      worst = std::max(worst, std::abs(fd - g[i]) / (1.0 + std::abs(g[i])));
      xp[i] = x[i];
      xm[i] = x[i];
    }
  }
  return worst;
}

double prox_residual(const Objective& obj, double theta, const Vector& x) {
  const Vector z = obj.proximal(theta, x);
  return (x - z - theta * obj.gradient(z)).norm();
}

Objective load_matrix_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("matrix problem: cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    std::vector<double> row;
    for (auto tok : tokens) {
      const auto v = detail::parse_double(tok);
      if (!v) throw InvalidArgument("matrix problem: bad number '" + std::string(tok) + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() != 2) {
    throw InvalidArgument("matrix problem: first line must be 'm n'");
  }
  const auto m = static_cast<Eigen::Index>(rows[0][0]);
  const auto n = static_cast<Eigen::Index>(rows[0][1]);
  if (m <= 0 || n <= 0 || static_cast<double>(m) != rows[0][0] ||
      static_cast<double>(n) != rows[0][1]) {
    throw InvalidArgument("matrix problem: m and n must be positive integers");
  }
  if (static_cast<Eigen::Index>(rows.size()) != m + 2) {
    throw InvalidArgument("matrix problem: expected " + std::to_string(m) +
                          " rows of A followed by one row b");
  }
  Matrix A(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<Eigen::Index>(rows[i + 1].size()) != n) {
      throw InvalidArgument("matrix problem: row " + std::to_string(i + 1) + " of A needs " +
                            std::to_string(n) + " entries");
    }
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = rows[i + 1][j];
  }
  const auto& brow = rows.back();
  if (static_cast<Eigen::Index>(brow.size()) != m) {
    throw InvalidArgument("matrix problem: b needs " + std::to_string(m) + " entries");
  }
  Vector b = Eigen::Map<const Vector>(brow.data(), m);
  auto obj = make_least_squares(A, b);
  obj.name = "matrix:" + path;
  return obj;
}

Objective resolve_problem(const std::string& spec) {
  const std::string_view s = detail::trim(spec);
  if (s == "quad1d") {
    auto obj = make_least_squares(Matrix::Identity(1, 1), Vector::Zero(1));
    obj.name = "quad1d";
    return obj;
  }
  if (s == "abs") return make_abs(1);
  if (s.starts_with("zero:")) {
    const auto n = detail::parse_int(s.substr(5));
    if (!n || *n <= 0) throw InvalidArgument("problem 'zero:<n>': n must be a positive integer");
    return make_zero(static_cast<int>(*n));
  }
  if (s.starts_with("ls:")) {
    const auto parts = detail::split(s.substr(3), ',');
    if (parts.size() != 2) throw InvalidArgument("problem 'ls:<a>,<b>' needs two coefficients");
    const auto a = detail::parse_double(parts[0]);
    const auto b = detail::parse_double(parts[1]);
    if (!a || !b) throw InvalidArgument("problem 'ls:<a>,<b>': bad coefficient");
    Matrix A(1, 2);
    A << *a, *b;
    auto obj = make_least_squares(A, Vector::Zero(1));
    obj.name = std::string(s);
    return obj;
  }
  if (s.starts_with("matrix:")) return load_matrix_problem(std::string(s.substr(7)));
  throw InvalidArgument("unknown problem '" + std::string(s) + "'");
}

std::vector<ProblemInfo> list_problems() {
  return {
      {"ls:<a>,<b>", "f(x,y) = ½(ax + by)², degenerate 1×2 least squares, x* = 0"},
      {"quad1d", "f(x) = ½x²"},
      {"abs", "f(x) = |x| (prox only)"},
      {"zero:<n>", "f ≡ 0 on R^n"},
      {"matrix:<path>", "½‖Ax − b‖² read from a text file: 'm n', m rows of A, one row b"},
  };
}

}  // namespace trigs
