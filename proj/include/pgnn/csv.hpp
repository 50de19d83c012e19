#pragma once
// CSV emitters for every report type. Column sets are frozen contracts
// (see docs/formats.md); doubles are printed in shortest round-trip form
// so identical runs produce identical bytes.

#include <string>
#include <vector>

#include "pgnn/diagnostics.hpp"
#include "pgnn/errors.hpp"
#include "pgnn/format.hpp"
#include "pgnn/shaping.hpp"
#include "pgnn/train.hpp"

namespace pgnn::csvio {

namespace detail {

inline std::string opt(const std::optional<double>& v) {
  return v.has_value() ? fmt::format_double(*v) : std::string();
}

}  // namespace detail

// epoch,loss,val_loss[,val_acc],grad_norm,res_norm_l1..res_norm_lK
// val_acc appears only when some record carries one (classification runs).
inline std::string metrics_csv(const train::TrainLog& log) {
  if (log.records.empty()) throw ValidationError("metrics_csv: empty log");
  const std::size_t layers = log.records.front().residual_norms.size();
  bool has_acc = false;
  for (const auto& r : log.records) has_acc = has_acc || r.val_accuracy.has_value();

  std::string out = "epoch,loss,val_loss";
  if (has_acc) out += ",val_acc";
  out += ",grad_norm";
  for (std::size_t l = 0; l < layers; ++l)
    out += ",res_norm_l" + std::to_string(l + 1);
  out += "\n";

  for (const auto& r : log.records) {
    out += std::to_string(r.epoch) + "," + fmt::format_double(r.train_loss) + "," +
           detail::opt(r.val_loss);
    if (has_acc) out += "," + detail::opt(r.val_accuracy);
    out += "," + fmt::format_double(r.grad_norm);
    for (double rn : r.residual_norms) out += "," + fmt::format_double(rn);
    out += "\n";
  }
  return out;
}

// epoch,layer,neuron,variance
inline std::string actvar_csv(const train::TrainLog& log) {
  if (log.records.empty()) throw ValidationError("actvar_csv: empty log");
  std::string out = "epoch,layer,neuron,variance\n";
  for (const auto& r : log.records)
    for (std::size_t l = 0; l < r.activation_variance.size(); ++l)
      for (std::size_t n = 0; n < r.activation_variance[l].size(); ++n)
        out += std::to_string(r.epoch) + "," + std::to_string(l) + "," +
               std::to_string(n) + "," +
               fmt::format_double(r.activation_variance[l][n]) + "\n";
  return out;
}

// layer,probe,index,value,condition
inline std::string spectrum_csv(const diag::SpectrumReport& report) {
  std::string out = "layer,probe,index,value,condition\n";
  for (const auto& e : report.entries)
    for (std::size_t k = 0; k < e.singular_values.size(); ++k)
      out += std::to_string(e.layer) + "," + std::to_string(e.probe) + "," +
             std::to_string(k) + "," + fmt::format_double(e.singular_values[k]) + "," +
             fmt::format_double(e.condition) + "\n";
  return out;
}

// mode,phase,gain,mean_gain
inline std::string freq_csv(const diag::FrequencyResponse& fr) {
  std::string out = "mode,phase,gain,mean_gain\n";
  for (std::size_t i = 0; i < fr.modes.size(); ++i)
    for (std::size_t p = 0; p < fr.per_phase[i].size(); ++p)
      out += std::to_string(fr.modes[i]) + "," + std::to_string(p) + "," +
             fmt::format_double(fr.per_phase[i][p]) + "," +
             fmt::format_double(fr.gains[i]) + "\n";
  return out;
}

// t,delta,energy
inline std::string recursion_csv(const diag::RecursionTrace& trace) {
  std::string out = "t,delta,energy\n";
  for (std::size_t t = 0; t < trace.deltas.size(); ++t)
    out += std::to_string(t + 1) + "," + fmt::format_double(trace.deltas[t]) + "," +
           fmt::format_double(trace.energies[t]) + "\n";
  return out;
}

// sigma,mean_dev,std_dev,slope,normalized_slope (fit repeated on every row)
inline std::string robustness_csv(const diag::RobustnessReport& report) {
  std::string out = "sigma,mean_dev,std_dev,slope,normalized_slope\n";
  for (std::size_t i = 0; i < report.sigmas.size(); ++i)
    out += fmt::format_double(report.sigmas[i]) + "," +
           fmt::format_double(report.mean_dev[i]) + "," +
           fmt::format_double(report.std_dev[i]) + "," +
           fmt::format_double(report.slope) + "," +
           fmt::format_double(report.normalized_slope) + "\n";
  return out;
}

// depth,diverged,divergence_epoch,final_loss,final_val_loss
inline std::string depth_csv(const std::vector<diag::DepthRecord>& records) {
  std::string out = "depth,diverged,divergence_epoch,final_loss,final_val_loss\n";
  for (const auto& r : records) {
    out += std::to_string(r.depth) + "," + (r.diverged ? "1" : "0") + ",";
    out += r.diverged ? std::to_string(r.divergence_epoch) : std::string();
    out += ",";
    out += r.diverged ? std::string() : fmt::format_double(r.final_loss);
    out += ",";
    if (!r.diverged && r.final_val_loss.has_value())
      out += fmt::format_double(*r.final_val_loss);
    out += "\n";
  }
  return out;
}

// variant,seed_index,final_metric,projection_drift,variant_mean,variant_std
inline std::string variants_csv(const std::vector<diag::VariantOutcome>& outcomes) {
  std::string out = "variant,seed_index,final_metric,projection_drift,variant_mean,variant_std\n";
  for (const auto& vo : outcomes)
    for (std::size_t s = 0; s < vo.finals.size(); ++s)
      out += std::string(shaping::kind_name(vo.kind)) + "," + std::to_string(s) + "," +
             fmt::format_double(vo.finals[s]) + "," +
             fmt::format_double(vo.projection_drift[s]) + "," +
             fmt::format_double(vo.final_mean) + "," +
             fmt::format_double(vo.final_std) + "\n";
  return out;
}

// ============================================================================
// File IO
// ============================================================================

}  // namespace pgnn::csvio
