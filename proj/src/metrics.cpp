#include "leakdet/metrics.hpp"

#include "leakdet/error.hpp"
#include "leakdet/io.hpp"

namespace leakdet {

namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

Metrics metrics_from_confusion(const Confusion& c) {
  Metrics m;
  m.counts = c;
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn);
  const auto fn = static_cast<double>(c.fn);
  m.accuracy = ratio(tp + tn, static_cast<double>(c.total()));
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.specificity = ratio(tn, tn + fp);
  if (m.precision && m.recall) m.f1 = ratio(2.0 * *m.precision * *m.recall, *m.precision + *m.recall);
  return m;
}

Metrics compute_metrics(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred) {
  if (y_true.size() != y_pred.size()) fail(ErrorKind::validation, "label/prediction length mismatch");
  if (y_true.empty()) fail(ErrorKind::validation, "metrics need at least one sample");
  Confusion c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] != 0;
    const bool p = y_pred[i] != 0;
    if (t && p) ++c.tp;
    else if (!t && p) ++c.fp;
    else if (!t && !p) ++c.tn;
    else ++c.fn;
  }
  return metrics_from_confusion(c);
}

std::string format_optional(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string("N/A");
}

std::string format_metrics_report(const std::string& dataset, const Metrics& m) {
  std::string out;
  auto line = [&](const char* key, const std::string& value) {
    out += dataset + "." + key + "=" + value + "\n";
  };
  line("tp", std::to_string(m.counts.tp));
  line("fp", std::to_string(m.counts.fp));
  line("tn", std::to_string(m.counts.tn));
  line("fn", std::to_string(m.counts.fn));
  line("accuracy", format_optional(m.accuracy));
  line("precision", format_optional(m.precision));
  line("recall", format_optional(m.recall));
  line("specificity", format_optional(m.specificity));
  line("f1", format_optional(m.f1));
  return out;
}

}  // namespace leakdet
