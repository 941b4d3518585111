#include "rdstream/model.hpp"

#include "rdstream/error.hpp"

namespace rdstream {

const ModelParams& FullParamSet::active_model() const {
  if (models.empty()) throw std::logic_error("full parameter set is empty");
  return models.at(active).model;
}

ModelParams& FullParamSet::active_model() {
  if (models.empty()) throw std::logic_error("full parameter set is empty");
  return models.at(active).model;
}

Reconstruction reconstruct(const ModelParams& model) {
  Reconstruction r;
  r.trend = reconstruct_trend(model.trend, model.window_length);
  r.seasonal = reconstruct_seasonal(model.seasonal);
  if (r.seasonal.dims() != r.trend.dims()) {
    throw DimensionError("seasonal and trend components disagree in shape");
  }
  r.outliers = model.outliers.empty() ? Tensor3(r.trend.dims()) : model.outliers;
  return r;
}

}  // namespace rdstream
