#pragma once

// Least-squares gradient descent as a farm: minimize 0.5 |Ax - b|^2.
// The job is the current iterate x; worker r of K owns the contiguous row
// block [floor((r-1) m / K), floor(r m / K)) and returns A_blk^T (A_blk x - b_blk).
// The master sums the partials in rank order and steps x <- x - step * g.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bsf/bytes.hpp"

namespace bsf {

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Plain-text format: first line `m n`, then m rows of n decimals.
DenseMatrix read_matrix(std::istream& in);
DenseMatrix load_matrix(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const DenseMatrix& m);

/// [begin, end) rows owned by worker `rank` (1-based) of `workers`.
std::pair<std::size_t, std::size_t> row_block(std::size_t rows, int rank, int workers);

struct QuadraticProblem {
  DenseMatrix a;
  std::vector<double> b;
  double step = 1.0;  // lambda
  double tolerance = 1e-10;
  std::size_t max_iterations = 10'000;
  std::vector<double> x0;  // empty means zeros
};

/// Named fixtures: "identity2" (A = I, b = (1, 1), step 1) and "small64x16"
/// (seeded Gaussian 64x16 A, step 1 / sigma_max^2).
QuadraticProblem quadratic_fixture(std::string_view name);

/// Largest eigenvalue of A^T A by power iteration.
double gram_spectral_radius(const DenseMatrix& a, std::size_t iterations = 500);

struct QuadraticResult {
  std::vector<double> x;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  std::vector<double> grad_norms;  // |g| evaluated at each iteration's input
};

void to_json(nlohmann::json& j, const QuadraticResult& r);

class QuadraticFarm {
 public:
  struct MasterState {
    std::vector<double> x;
    std::vector<double> grad_norms;
    double grad_norm = 0.0;
  };
  struct WorkerState {
    std::size_t row_begin = 0;
    std::size_t row_end = 0;
  };
  using Job = std::vector<double>;
  using Partial = std::vector<double>;
  using Output = QuadraticResult;

  explicit QuadraticFarm(QuadraticProblem q);

  const QuadraticProblem& problem() const noexcept { return q_; }

  MasterState init_master(int workers) const;
  WorkerState init_worker(int rank, int workers) const;
  Job make_job(const MasterState& s) const { return s.x; }
  Partial worker_step(const Job& x, int rank, int workers, WorkerState& ws) const;
  MasterState reduce(MasterState s, std::span<const Partial> partials) const;
  bool exit_condition(const MasterState& s) const;
  Output finalize(const MasterState& s) const;

  Bytes encode_job(const Job& j) const { return std::move(ByteWriter{}.f64s(j)).take(); }
  Job decode_job(ByteView b) const { return ByteReader(b).f64s(); }
  Bytes encode_partial(const Partial& p) const { return std::move(ByteWriter{}.f64s(p)).take(); }
  Partial decode_partial(ByteView b) const { return ByteReader(b).f64s(); }

 private:
  QuadraticProblem q_;
};

/// Validates dimensions and step/tolerance; throws InvalidParameter.
QuadraticFarm make_quadratic(QuadraticProblem q);

}  // namespace bsf
