#include "dsr/metrics.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <ostream>

namespace dsr {

Metrics& Metrics::operator+=(const Metrics& o) {
  values += o.values;
  messages += o.messages;
  broadcasts += o.broadcasts;
  time_steps += o.time_steps;
  serialized_time += o.serialized_time;
  setup_messages += o.setup_messages;
  return *this;
}

CrossingTracker::CrossingTracker(std::vector<double> accuracies) {
  std::sort(accuracies.begin(), accuracies.end(), std::greater<>());
  for (double a : accuracies) crossings_.push_back({a, std::nullopt, {}});
}

void CrossingTracker::observe(long iter, double err, const Metrics& cum) {
  for (auto& c : crossings_) {
    if (!c.iter && err <= c.accuracy) {
      c.iter = iter;
      c.at = cum;
    }
  }
}

bool CrossingTracker::all_reached() const {
  return std::all_of(crossings_.begin(), crossings_.end(), [](const Crossing& c) { return c.iter.has_value(); });
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& os, bool extended) {
  os << "iter,err,values_cum,messages_cum,broadcasts_cum,time_steps_cum";
  if (extended) os << ",outer_iter,s_k,eps_norm_sq,initiated_count";
  os << '\n';
  for (const auto& r : rows) {
    os << r.iter << ',' << detail::fmt_double(r.err) << ',' << r.cum.values << ','
       << r.cum.messages << ',' << r.cum.broadcasts << ',' << r.cum.time_steps;
    if (extended) {
      os << ',' << r.outer_iter << ',' << r.s_k << ',';
      if (r.eps_norm_sq >= 0.0) os << detail::fmt_double(r.eps_norm_sq);
      os << ',' << r.initiated_count;
    }
    os << '\n';
  }
}

}  // namespace dsr
