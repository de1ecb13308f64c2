#ifndef RPDMIX_BREAD_MAKING_HPP
#define RPDMIX_BREAD_MAKING_HPP

// The bread-making study: flour blends (x1, x2, x3) with mixing and proofing
// time as noise variables. Model term lists and the robust-design
// scenarios used by the CLI, tests and samples.

#include <string>
#include <vector>

#include "rpdmix/glm.hpp"
#include "rpdmix/jmmd.hpp"
#include "rpdmix/moments.hpp"
#include "rpdmix/optimizer.hpp"
#include "rpdmix/terms.hpp"

namespace rpdmix::bread {

/// The 18-term mean model selected from the 28-term reduced model.
inline LinearPredictorSpec mean_terms() {
  return LinearPredictorSpec::from_labels({
      "x1", "x2", "x3", "x1*x3", "x1*x2*(x1-x2)", "x1*x3*(x1-x3)",              //
      "x1:z1", "x3:z1", "x1*x2*(x1-x2):z1",                                     //
      "x1:z2", "x2:z2", "x1*x3:z2", "x1*x3*(x1-x3):z2",                         //
      "x2:z1^2", "x3:z1^2", "x1*x3:z1^2", "x1*x2*(x1-x2):z1^2", "x1*x3*(x1-x3):z1^2",
  });
}

inline JointModelSpec joint_spec(LinearPredictorSpec mean, LinearPredictorSpec disp) {
  JointModelSpec s;
  s.mean_spec = std::move(mean);
  s.dispersion_spec = std::move(disp);
  return s;
}

/// JM0: both models use the 18 mean terms.
inline JointModelSpec jm0() { return joint_spec(mean_terms(), mean_terms()); }

/// JM1: x1:z1 dropped from the mean, dispersion as JM0.
inline JointModelSpec jm1() { return joint_spec(mean_terms().without(std::vector<std::string>{"x1:z1"}), mean_terms()); }

/// JM2: full mean; dispersion without x1:z1 and x2:z1^2.
inline JointModelSpec jm2() {
  return joint_spec(mean_terms(), mean_terms().without(std::vector<std::string>{"x1:z1", "x2:z1^2"}));
}

/// JM3: mean without x1:z1 and x1*x2*(x1-x2):z1; dispersion without four
/// noise-interaction terms.
inline JointModelSpec jm3() {
  return joint_spec(mean_terms().without(std::vector<std::string>{"x1:z1", "x1*x2*(x1-x2):z1"}),
                    mean_terms().without(std::vector<std::string>{"x3:z1", "x1*x2*(x1-x2):z1", "x1*x3:z2",
                                                                  "x1*x3*(x1-x3):z2"}));
}

inline constexpr double kTargetVolume = 530.0;

/// Residual variance used with the delta method for the robust-design
/// scenarios (the OLS fit of the shipped corpus gives D/(n-p) = 404.56).
inline constexpr double kDeltaSigma2 = 58.36;

/// The eight noise scenarios (raw minutes), low to high.
inline std::vector<ScenarioSpec> scenarios() {
  return {
      {10.0, 6.25, 47.5, 9.766},   {12.5, 6.25, 44.375, 9.766}, {15.0, 6.25, 41.25, 9.766},
      {15.0, 25.0, 47.5, 39.063},  {15.0, 56.25, 47.5, 87.891}, {20.0, 6.25, 53.75, 9.766},
      {20.0, 25.0, 53.75, 39.0625}, {20.0, 56.25, 53.75, 87.891},
  };
}

/// Builds JMMD models from a joint fit and delta models from an OLS fit.
inline ModelFactory model_factory(const JointFit& joint, const GlmFit& ols, const LinearPredictorSpec& ols_spec,
                                  double sigma2 = kDeltaSigma2) {
  return [joint, ols, ols_spec, sigma2](MomentMethod method, MomentMode mode, const GaussianNoise& noise) {
    if (method == MomentMethod::Jmmd) {
      JmmdMomentOptions o;
      o.mode = mode;
      return jmmd_moment_model(joint, noise, o);
    }
    return delta_moment_model(ols_spec, ols.beta, sigma2, noise, mode);
  };
}

}  // namespace rpdmix::bread

#endif  // RPDMIX_BREAD_MAKING_HPP
