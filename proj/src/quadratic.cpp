#include "bsf/quadratic.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "bsf/errors.hpp"

namespace bsf {

DenseMatrix read_matrix(std::istream& in) {
  long long rows = -1, cols = -1;
  if (!(in >> rows >> cols) || rows < 1 || cols < 1) {
    throw InvalidParameter("matrix header must be 'm n' with m, n >= 1");
  }
  DenseMatrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (!(in >> m(i, j))) {
        throw InvalidParameter("matrix body ended early at row " + std::to_string(i) + ", column " + std::to_string(j));
      }
    }
  }
  return m;
}

DenseMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open matrix file " + path.string());
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const DenseMatrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
}

std::pair<std::size_t, std::size_t> row_block(std::size_t rows, int rank, int workers) {
  if (workers < 1 || rank < 1 || rank > workers) throw InvalidParameter("row_block: rank outside 1..K");
  const auto r = static_cast<std::size_t>(rank);
  const auto k = static_cast<std::size_t>(workers);
  return {(r - 1) * rows / k, r * rows / k};
}

double gram_spectral_radius(const DenseMatrix& a, std::size_t iterations) {
  std::vector<double> v(a.cols(), 1.0), av(a.rows());
  double lambda = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
      av[i] = s;
    }
    std::vector<double> w(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) w[j] += a(i, j) * av[i];
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    lambda = norm;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = w[j] / norm;
  }
  return lambda;
}

QuadraticProblem quadratic_fixture(std::string_view name) {
  if (name == "identity2") {
    QuadraticProblem q;
    q.a = DenseMatrix(2, 2);
    q.a(0, 0) = q.a(1, 1) = 1.0;
    q.b = {1.0, 1.0};
    q.step = 1.0;
    q.tolerance = 1e-12;
    q.max_iterations = 100;
    return q;
  }
  if (name == "small64x16") {
    constexpr std::size_t m = 64, n = 16;
    std::mt19937_64 rng(20170403);
    // Box-Muller on raw 53-bit draws: std::normal_distribution is not portable.
    const auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    const auto gauss = [&] { return std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * M_PI * uniform()); };
    QuadraticProblem q;
    q.a = DenseMatrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) q.a(i, j) = gauss() / 8.0;
    }
    q.b.resize(m);
    for (auto& v : q.b) v = gauss();
    // step <= 1 / sigma_max^2 keeps I - step A^T A a contraction with |g| non-increasing.
    q.step = 1.0 / (1.01 * gram_spectral_radius(q.a));
    q.tolerance = 1e-10;
    q.max_iterations = 20'000;
    return q;
  }
  throw InvalidParameter("unknown quadratic fixture '" + std::string(name) + "' (identity2, small64x16)");
}

void to_json(nlohmann::json& j, const QuadraticResult& r) {
  j = nlohmann::json{{"x", r.x}, {"grad_norm", r.grad_norm}, {"iterations", r.iterations}};
}

QuadraticFarm::QuadraticFarm(QuadraticProblem q) : q_(std::move(q)) {
  if (q_.a.rows() == 0 || q_.a.cols() == 0) throw InvalidParameter("A must be non-empty");
  if (q_.b.size() != q_.a.rows()) {
    throw InvalidParameter("b has " + std::to_string(q_.b.size()) + " entries, A has " + std::to_string(q_.a.rows()) +
                           " rows");
  }
  if (!q_.x0.empty() && q_.x0.size() != q_.a.cols()) throw InvalidParameter("x0 length must equal A's column count");
  if (!(q_.step > 0.0) || !std::isfinite(q_.step)) throw InvalidParameter("step size must be finite and > 0");
  if (!(q_.tolerance > 0.0)) throw InvalidParameter("tolerance must be > 0");
  if (q_.max_iterations < 1) throw InvalidParameter("max_iterations must be >= 1");
}

QuadraticFarm make_quadratic(QuadraticProblem q) { return QuadraticFarm(std::move(q)); }

QuadraticFarm::MasterState QuadraticFarm::init_master(int) const {
  MasterState s;
  s.x = q_.x0.empty() ? std::vector<double>(q_.a.cols(), 0.0) : q_.x0;
  s.grad_norm = std::numeric_limits<double>::infinity();
  return s;
}

QuadraticFarm::WorkerState QuadraticFarm::init_worker(int rank, int workers) const {
  const auto [begin, end] = row_block(q_.a.rows(), rank, workers);
  return {begin, end};
}

QuadraticFarm::Partial QuadraticFarm::worker_step(const Job& x, int, int, WorkerState& ws) const {
  if (x.size() != q_.a.cols()) throw InvalidParameter("job length does not match A's column count");
  Partial g(q_.a.cols(), 0.0);
  for (std::size_t i = ws.row_begin; i < ws.row_end; ++i) {
    const auto row = q_.a.row(i);
    double residual = -q_.b[i];
    for (std::size_t j = 0; j < row.size(); ++j) residual += row[j] * x[j];
    for (std::size_t j = 0; j < row.size(); ++j) g[j] += row[j] * residual;
  }
  return g;
}

QuadraticFarm::MasterState QuadraticFarm::reduce(MasterState s, std::span<const Partial> partials) const {
  std::vector<double> g(q_.a.cols(), 0.0);
  for (const auto& p : partials) {
    if (p.size() != g.size()) throw InvalidParameter("partial gradient has the wrong length");
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += p[j];
  }
  double norm = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    norm += g[j] * g[j];
    s.x[j] -= q_.step * g[j];
  }
  s.grad_norm = std::sqrt(norm);
  s.grad_norms.push_back(s.grad_norm);
  return s;
}

bool QuadraticFarm::exit_condition(const MasterState& s) const {
  return s.grad_norm < q_.tolerance || s.grad_norms.size() >= q_.max_iterations;
}

QuadraticResult QuadraticFarm::finalize(const MasterState& s) const {
  return {s.x, s.grad_norm, s.grad_norms.size(), s.grad_norms};
}

}  // namespace bsf
