#include "mfpinn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace mfpinn::kernels {
namespace {

const Backend* resolve_default() {
  if (const char* env = std::getenv("MFPINN_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_backend();
    if (want == "avx2" && avx2_supported()) return &avx2_backend();
    // Unknown or unsupported request falls through to autodetect.
  }
  if (avx2_supported()) return &avx2_backend();
  return &scalar_backend();
}

std::atomic<const Backend*>& slot() {
  static std::atomic<const Backend*> s{resolve_default()};
  return s;
}

}  // namespace

const Backend& active() { return *slot().load(std::memory_order_relaxed); }

void force(const std::string& name) {
  if (name == "scalar") {
    slot().store(&scalar_backend(), std::memory_order_relaxed);
    return;
  }
  if (name == "avx2") {
    if (!avx2_supported())
      throw std::runtime_error("kernels: avx2 not supported on this host");
    slot().store(&avx2_backend(), std::memory_order_relaxed);
    return;
  }
  throw std::runtime_error("kernels: unknown backend '" + name + "'");
}

std::vector<std::string> available() {
  std::vector<std::string> out{"scalar"};
  if (avx2_supported()) out.emplace_back("avx2");
  return out;
}

}  // namespace mfpinn::kernels
