#pragma once

#include <string>
#include <vector>

#include "defined/eval.hpp"
#include "defined/training.hpp"

namespace defined {

/// Curve CSV: header "length,ser,stderr", one row per point, optional footer
/// "gain_df,<value>," when the DF gain is defined.
void write_curve_csv(const std::string& path, const EvalCurve& curve);

/// Parses points + optional gain footer (config metadata lives in the
/// adjacent manifest, not the CSV).
EvalCurve read_curve_csv(const std::string& path);

/// Joins curves on length into one wide CSV:
/// length,<name>_ser,<name>_stderr,...  (name = input basename sans .csv;
/// missing lengths leave fields empty).
void write_compare_csv(const std::string& out_path, const std::vector<std::string>& inputs);

/// Loss trace CSV: header "step,phase,loss".
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace defined
