#include "stlmc/rng.hpp"

#include <cmath>

namespace stlmc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::undefined_operation: return "undefined_operation";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::reducible_chain: return "reducible_chain";
    case ErrorCode::rejection_ceiling: return "rejection_ceiling";
    case ErrorCode::schema: return "schema";
  }
  return "unknown";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

double RngStream::exponential(double rate) {
  return -std::log1p(-uniform()) / rate;
}

Vec RngStream::normal_vector(Eigen::Index d) {
  Vec out(d);
  for (Eigen::Index i = 0; i < d; ++i) out[i] = normal();
  return out;
}

std::size_t RngStream::index(std::size_t n) {
  auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

RngStream RngStream::child(std::uint64_t key) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(key + 1)));
}

}  // namespace stlmc
