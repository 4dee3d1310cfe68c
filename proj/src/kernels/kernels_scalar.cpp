#include "confscore/kernels.hpp"
#include "scalar_math.hpp"

namespace confscore::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double lanes[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lanes[i & 3] = lanes[i & 3] + a[i] * b[i];
  return reduce_lanes(lanes);
}

double sum(const double* a, std::size_t n) {
  double lanes[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lanes[i & 3] = lanes[i & 3] + a[i];
  return reduce_lanes(lanes);
}

void expit_shift(const double* offset, const double* h, double eps,
                 double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = expit_parts(std::fma(eps, h[i], offset[i])).p;
}

LogisticSums logistic_path(const double* offset, const double* h,
                           const double* y, double eps, std::size_t n) {
  double score[4] = {0, 0, 0, 0}, info[4] = {0, 0, 0, 0},
         loss[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t l = i & 3;
    logistic_path_element(offset[i], h[i], y[i], eps, score[l], info[l],
                          loss[l]);
  }
  return {reduce_lanes(score), reduce_lanes(info), reduce_lanes(loss)};
}

}  // namespace confscore::kernels::scalar

namespace confscore::kernels {

double exp_reference(double x) { return exp_scalar(x); }
double softplus_reference(double x) { return softplus_scalar(x); }

}  // namespace confscore::kernels
