#pragma once
#include <exception>

namespace aglv {

// Collects the first exception thrown inside an OpenMP region so it can be
// rethrown on the serial side (exceptions must not escape a parallel loop).
class OmpExceptionGuard {
 public:
  template <class F>
  void run(F&& body) noexcept {
    try {
      body();
    } catch (...) {
      capture();
    }
  }

  void rethrow_if_any() const {
    if (ptr_) std::rethrow_exception(ptr_);
  }

 private:
  void capture() {
#pragma omp critical(aglv_exception_guard)
    if (!ptr_) ptr_ = std::current_exception();
  }

  std::exception_ptr ptr_;
};

}  // namespace aglv
