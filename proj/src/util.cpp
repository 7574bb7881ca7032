#include "kval/util.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <mutex>

namespace kval {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Vec hashed_unit_vector(std::string_view word, int dim, std::uint64_t seed) {
  if (dim <= 0) throw UsageError("hashed_unit_vector: dimension must be positive");
  SplitMix64 rng(fnv1a64(word, seed ^ 0x9e3779b97f4a7c15ull));
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.next_signed_unit();
  double norm2 = 0.0;
  for (int i = 0; i < dim; ++i) norm2 += v[i] * v[i];
  if (norm2 == 0.0) {  // all components exactly -1 is impossible, but stay safe
    v.setZero();
    v[0] = 1.0;
    return v;
  }
  double norm = std::sqrt(norm2);
  for (int i = 0; i < dim; ++i) v[i] /= norm;
  return v;
}

namespace {
std::mutex g_log_mutex;
}

void log_warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[warn] " << message << "\n";
}

void log_info(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[info] " << message << "\n";
}

std::string iso8601_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace kval
