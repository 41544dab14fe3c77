#include "coulomb2d/convolution.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <tuple>

#include "coulomb2d/errors.hpp"
#include "coulomb2d/kernel.hpp"

namespace coulomb2d {

namespace {

// The FFTW planner is not thread-safe; execution with new-array functions is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct RealBuffer {
  double* p;
  explicit RealBuffer(std::size_t n) : p(fftw_alloc_real(n)) {}
  ~RealBuffer() { fftw_free(p); }
  RealBuffer(const RealBuffer&) = delete;
  RealBuffer& operator=(const RealBuffer&) = delete;
};

struct ComplexBuffer {
  fftw_complex* p;
  explicit ComplexBuffer(std::size_t n) : p(fftw_alloc_complex(n)) {}
  ~ComplexBuffer() { fftw_free(p); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;
};

}  // namespace

struct Convolver::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Convolver::Convolver(const GridGeometry& g, const std::function<double(long, long)>& kernel)
    : geometry_(g), px_(2 * g.nx), py_(2 * g.ny), plans_(std::make_unique<Plans>()) {
  const std::size_t nreal = px_ * py_, ncplx = py_ * (px_ / 2 + 1);
  RealBuffer in(nreal);
  ComplexBuffer out(ncplx);
  {
    std::lock_guard lock(planner_mutex());
    // FFTW_ESTIMATE keeps plans (and therefore results) identical run to run.
    plans_->forward = fftw_plan_dft_r2c_2d(static_cast<int>(py_), static_cast<int>(px_), in.p, out.p,
                                           FFTW_ESTIMATE);
    plans_->backward = fftw_plan_dft_c2r_2d(static_cast<int>(py_), static_cast<int>(px_), out.p, in.p,
                                            FFTW_ESTIMATE);
  }
  std::memset(in.p, 0, sizeof(double) * nreal);
  const long nx = static_cast<long>(g.nx), ny = static_cast<long>(g.ny);
  const long px = static_cast<long>(px_), py = static_cast<long>(py_);
  for (long dj = -(ny - 1); dj <= ny - 1; ++dj) {
    const long row = (dj + py) % py;
    for (long di = -(nx - 1); di <= nx - 1; ++di) {
      const long col = (di + px) % px;
      in.p[row * px + col] = kernel(di, dj);
    }
  }
  fftw_execute_dft_r2c(plans_->forward, in.p, out.p);
  kernel_hat_.resize(ncplx);
  for (std::size_t k = 0; k < ncplx; ++k) kernel_hat_[k] = {out.p[k][0], out.p[k][1]};
}

Convolver::~Convolver() = default;

std::vector<double> Convolver::apply(std::span<const double> source) const {
  if (source.size() != geometry_.size()) throw PreconditionError("convolution input size mismatch");
  const std::size_t nreal = px_ * py_, ncplx = py_ * (px_ / 2 + 1);
  RealBuffer in(nreal);
  ComplexBuffer out(ncplx);
  std::memset(in.p, 0, sizeof(double) * nreal);
  for (std::size_t j = 0; j < geometry_.ny; ++j)
    std::memcpy(in.p + j * px_, source.data() + j * geometry_.nx, sizeof(double) * geometry_.nx);
  fftw_execute_dft_r2c(plans_->forward, in.p, out.p);
  for (std::size_t k = 0; k < ncplx; ++k) {
    const std::complex<double> v = std::complex<double>(out.p[k][0], out.p[k][1]) * kernel_hat_[k];
    out.p[k][0] = v.real();
    out.p[k][1] = v.imag();
  }
  fftw_execute_dft_c2r(plans_->backward, out.p, in.p);
  const double scale = 1.0 / static_cast<double>(nreal);
  std::vector<double> result(geometry_.size());
  for (std::size_t j = 0; j < geometry_.ny; ++j)
    for (std::size_t i = 0; i < geometry_.nx; ++i)
      result[j * geometry_.nx + i] = in.p[j * px_ + i] * scale;
  return result;
}

double log_cell_kernel(double h, long di, long dj) {
  const double x = h * static_cast<double>(di), y = h * static_cast<double>(dj);
  if (std::labs(di) <= kExactCellReach && std::labs(dj) <= kExactCellReach)
    return kernel::log_rectangle_integral(x - 0.5 * h, x + 0.5 * h, y - 0.5 * h, y + 0.5 * h);
  return -h * h * std::log(std::hypot(x, y));
}

double log_cell_pair_kernel(double h, long di, long dj) {
  if (std::labs(di) <= kPairExactReach && std::labs(dj) <= kPairExactReach)
    return h * h * (kernel::log_unit_cell_pair_integral(di, dj) - std::log(h));
  return -h * h * std::log(h * std::hypot(static_cast<double>(di), static_cast<double>(dj)));
}

namespace {

using CacheKey = std::tuple<int, double, double, double, std::size_t, std::size_t, double>;

std::shared_ptr<const Convolver> cached(int kind, const GridGeometry& g, double param,
                                        const std::function<double(long, long)>& kernel) {
  static std::mutex m;
  static std::map<CacheKey, std::shared_ptr<const Convolver>> cache;
  const CacheKey key{kind, g.origin.x, g.origin.y, g.cell, g.nx, g.ny, param};
  {
    std::lock_guard lock(m);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto conv = std::make_shared<const Convolver>(g, kernel);
  std::lock_guard lock(m);
  if (cache.size() > 12) cache.clear();
  return cache.emplace(key, conv).first->second;
}

}  // namespace

std::shared_ptr<const Convolver> log_convolver(const GridGeometry& g) {
  const double h = g.cell;
  return cached(0, g, 0.0, [h](long di, long dj) { return log_cell_kernel(h, di, dj); });
}

std::shared_ptr<const Convolver> log_pair_convolver(const GridGeometry& g) {
  const double h = g.cell;
  return cached(1, g, 0.0, [h](long di, long dj) { return log_cell_pair_kernel(h, di, dj); });
}

std::shared_ptr<const Convolver> circle_convolver(const GridGeometry& g, double eta) {
  const double h = g.cell;
  const long m = static_cast<long>(std::ceil(eta / h)) + 1;
  GridGeometry local;
  local.cell = h;
  local.nx = local.ny = static_cast<std::size_t>(2 * m + 1);
  local.origin = {-(static_cast<double>(m) + 0.5) * h, -(static_cast<double>(m) + 0.5) * h};
  std::vector<double> table(local.size(), 0.0);
  for (const auto& [k, f] : circle_cell_fractions(local, {0.0, 0.0}, eta)) table[k] = f;
  const std::size_t side = local.nx;
  return cached(2, g, eta, [table, m, side](long di, long dj) {
    if (std::labs(di) > m || std::labs(dj) > m) return 0.0;
    return table[static_cast<std::size_t>(dj + m) * side + static_cast<std::size_t>(di + m)];
  });
}

std::vector<std::complex<double>> padded_forward_fft(std::span<const double> values, std::size_t nx,
                                                     std::size_t ny, std::size_t px,
                                                     std::size_t py) {
  if (values.size() != nx * ny || px < nx || py < ny) throw PreconditionError("bad FFT padding");
  const std::size_t nreal = px * py, ncplx = py * (px / 2 + 1);
  RealBuffer in(nreal);
  ComplexBuffer out(ncplx);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_2d(static_cast<int>(py), static_cast<int>(px), in.p, out.p, FFTW_ESTIMATE);
  }
  std::memset(in.p, 0, sizeof(double) * nreal);
  for (std::size_t j = 0; j < ny; ++j) std::memcpy(in.p + j * px, values.data() + j * nx, sizeof(double) * nx);
  fftw_execute(plan);
  std::vector<std::complex<double>> result(ncplx);
  for (std::size_t k = 0; k < ncplx; ++k) result[k] = {out.p[k][0], out.p[k][1]};
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return result;
}

}  // namespace coulomb2d
