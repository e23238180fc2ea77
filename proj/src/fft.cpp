#include <fftw3.h>

#include <climits>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "lensless/core.hpp"

namespace lensless {

namespace {

// FFTW's planner is not thread-safe; plan creation is serialized here and
// cached plans are executed through the new-array interface, which is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int height, int width, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(height, width, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(static_cast<std::size_t>(height) * width);
    auto* out = fftw_alloc_complex(static_cast<std::size_t>(height) * width);
    fftw_plan plan = fftw_plan_dft_2d(height, width, in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) throw NumericalError("fft2: FFTW could not create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

ComplexField transform(const ComplexField& field, int sign) {
  if (field.height() == 0 || field.width() == 0) throw InputError("fft2: empty field");
  if (field.height() > INT_MAX || field.width() > INT_MAX ||
      field.height() > static_cast<std::size_t>(INT_MAX) / field.width()) {
    throw InputError("fft2: sample count overflows the transform index type");
  }
  const int h = static_cast<int>(field.height());
  const int w = static_cast<int>(field.width());
  ComplexField out(field.height(), field.width(), field.pitch_y(), field.pitch_x());
  fftw_plan plan = plan_cache().get(h, w, sign);
  // FFTW never writes to the input of an out-of-place complex transform.
  auto* in = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(field.samples().data()));
  fftw_execute_dft(plan, in, reinterpret_cast<fftw_complex*>(out.samples().data()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(field.size()));
  for (auto& v : out.samples()) v *= scale;
  return out;
}

}  // namespace

ComplexField fft2(const ComplexField& field) { return transform(field, FFTW_FORWARD); }

ComplexField ifft2(const ComplexField& field) { return transform(field, FFTW_BACKWARD); }

}  // namespace lensless
