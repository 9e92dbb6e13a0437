#include "svytrans/pipeline.hpp"

namespace svytrans {

PipelineOutput run_pipeline(const CombinedDataset& dataset, const EstimandSpec& spec,
                            const PipelineOptions& options) {
  validate_spec(spec, dataset);
  EstimateOptions eo;
  eo.scale = spec.effect_scale;
  eo.level = options.level;
  eo.continuity_correction = options.continuity_correction;

  PipelineOutput out;
  if (spec.estimator == Estimator::Naive) {
    out.estimate = estimate_naive(dataset, eo);
    return out;
  }
  const bool weighted = spec.estimator == Estimator::SurveyWeighted;
  out.model = fit_membership(dataset, spec.membership_learner, spec.covariate_subset, weighted,
                             options.gbm);
  WeightVector w = weighted ? delta_weights_two_stage(*out.model, dataset)
                            : gamma_weights(*out.model, dataset);
  if (options.cap_percentile) w = cap_weights(w, *options.cap_percentile);
  out.estimate = estimate_weighted(dataset, w, eo);
  out.weights = std::move(w);
  return out;
}

}  // namespace svytrans
