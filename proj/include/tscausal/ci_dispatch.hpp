#pragma once

#include "ci.hpp"
#include "ci_cmiknn.hpp"
#include "ci_gpdc.hpp"

namespace tscausal {

// Uniform entry point used by the discovery engine.
inline CITestResult run_ci_test(CITestName name, const CIQuery& q, const CITestOptions& opts) {
    switch (name) {
        case CITestName::RobustParCorr: return robust_parcorr(q, opts);
        case CITestName::ParCorrWLS: return parcorr_wls(q, opts);
        case CITestName::GPDC: return gpdc(q, opts);
        case CITestName::CMIknn: return cmi_knn(q, opts);
    }
    throw ConfigError("run_ci_test: unknown test");
}

}  // namespace tscausal
