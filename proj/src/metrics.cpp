#include "mfsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace mfsim {

DistributionSeries window_distribution(std::span<const LabelVector> labels, const DimensionSchema& schema,
                                       std::size_t w, Exec exec) {
  if (labels.empty()) throw ArgumentError("window_distribution needs labels");
  if (w == 0) throw ArgumentError("window must be >= 1");
  DistributionSeries out;
  out.window = w;
  std::vector<int> symbols(labels.size());
  for (std::size_t d = 0; d < schema.dimensions.size(); ++d) {
    const std::size_t L = schema.dimensions[d].labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].labels.size() != schema.dimensions.size()) {
        throw ArgumentError("label vector does not match the schema");
      }
      symbols[i] = labels[i].labels[d];
    }
    const auto counts = window_counts(symbols, L, w, exec);
    DistributionSeries::Track track;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      std::vector<double> v(counts.begin() + static_cast<std::ptrdiff_t>(t * L),
                            counts.begin() + static_cast<std::ptrdiff_t>((t + 1) * L));
      double total = 0.0;
      for (double c : v) total += c;
      track.empty.push_back(total == 0.0);
      if (total > 0.0) {
        for (auto& c : v) c /= total;
      }
      track.vectors.push_back(std::move(v));
    }
    out.dims.push_back(std::move(track));
  }
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double eps) {
  if (p.size() != q.size()) throw ArgumentError("kl_divergence: length mismatch");
  if (p.empty()) throw ArgumentError("kl_divergence: empty vectors");
  if (!(eps >= 0.0)) throw ArgumentError("kl_divergence: eps must be >= 0");
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw ArgumentError("kl_divergence: negative entry");
    sp += p[i] + eps;
    sq += q[i] + eps;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + eps) / sp;
    const double qi = (q[i] + eps) / sq;
    if (pi == 0.0) continue;
    if (qi == 0.0) return std::numeric_limits<double>::infinity();
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

double wasserstein1(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ArgumentError("wasserstein1: length mismatch");
  double cp = 0.0;
  double cq = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp += p[i];
    cq += q[i];
    total += std::abs(cp - cq);
  }
  return total;
}

double dtw_distance(std::span<const double> a, std::span<const double> b) {
  return dtw_accumulated_rolling(a, b) / static_cast<double>(a.size() + b.size());
}

F1Scores f1_scores(const std::vector<std::vector<int>>& real, const std::vector<std::vector<int>>& generated,
                   std::size_t labels) {
  const std::size_t steps = std::min(real.size(), generated.size());
  if (steps == 0) throw ArgumentError("f1_scores: no overlapping steps");
  std::vector<double> tp(labels, 0.0), fp(labels, 0.0), fn(labels, 0.0);
  std::vector<double> rc(labels), gc(labels);
  for (std::size_t t = 0; t < steps; ++t) {
    std::fill(rc.begin(), rc.end(), 0.0);
    std::fill(gc.begin(), gc.end(), 0.0);
    for (int l : real[t]) {
      if (l >= 0 && static_cast<std::size_t>(l) < labels) rc[static_cast<std::size_t>(l)] += 1.0;
    }
    for (int l : generated[t]) {
      if (l >= 0 && static_cast<std::size_t>(l) < labels) gc[static_cast<std::size_t>(l)] += 1.0;
    }
    for (std::size_t l = 0; l < labels; ++l) {
      const double m = std::min(rc[l], gc[l]);
      tp[l] += m;
      fp[l] += gc[l] - m;
      fn[l] += rc[l] - m;
    }
  }
  const auto f1 = [](double t, double p, double n) {
    const double denom = 2.0 * t + p + n;
    return denom == 0.0 ? 0.0 : 2.0 * t / denom;
  };
  F1Scores out;
  double TP = 0.0, FP = 0.0, FN = 0.0;
  std::size_t supported = 0;
  for (std::size_t l = 0; l < labels; ++l) {
    TP += tp[l];
    FP += fp[l];
    FN += fn[l];
    if (tp[l] + fp[l] + fn[l] > 0.0) {
      out.macro += f1(tp[l], fp[l], fn[l]);
      ++supported;
    }
  }
  if (supported > 0) out.macro /= static_cast<double>(supported);
  out.micro = f1(TP, FP, FN);
  return out;
}

namespace {

struct Stream {
  std::vector<ActionText> actions;
  std::vector<std::size_t> step_end;  // index one past each step's last action
};

Stream flatten(const Trajectory& traj, std::size_t first, std::size_t last) {
  Stream s;
  for (std::size_t t = first; t < last; ++t) {
    const auto& acts = traj.steps[t].actions;
    s.actions.insert(s.actions.end(), acts.begin(), acts.end());
    s.step_end.push_back(s.actions.size());
  }
  return s;
}

// Window series sampled at the last action of every step.
DistributionSeries sample_steps(const DistributionSeries& full, const std::vector<std::size_t>& step_end) {
  DistributionSeries out;
  out.window = full.window;
  for (const auto& track : full.dims) {
    DistributionSeries::Track t;
    for (std::size_t e : step_end) {
      t.vectors.push_back(track.vectors[e - 1]);
      t.empty.push_back(track.empty[e - 1]);
    }
    out.dims.push_back(std::move(t));
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::optional<double> report_nll(const Trajectory& real, const Trajectory& generated,
                                 const GenerativeBackend& policy, std::size_t first, std::size_t last) {
  const auto caps = policy.capabilities();
  if (!caps.supports_logprob) return std::nullopt;
  const auto strategy = generated.config.strategy;
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = first; t < last; ++t) {
    const auto& step = real.steps[t];
    // Condition on the observed mean field when the real trajectory carries one.
    const auto& mf = (step.mean_field.is_symbolic() || !step.mean_field.text_value().empty())
                         ? step.mean_field
                         : generated.steps[t].mean_field;
    for (std::size_t i = 0; i < step.actions.size() && i < step.states.size(); ++i) {
      GenerationRequest req;
      if (caps.symbolic) {
        const auto s = toy::parse_state(step.states[i].profile);
        if (!s) throw ArgumentError("real trajectory state carries no toy symbol");
        int m = 0;
        if (strategy == ContextStrategy::mean_field) {
          if (!mf.is_symbolic()) throw ArgumentError("NLL under a symbolic policy needs a symbolic mean field");
          m = mf.symbol_value();
        }
        req.condition = {*s, m};
      } else {
        ContextText ctx;
        ctx.strategy = strategy;
        if (strategy == ContextStrategy::mean_field) ctx.summary = mf.display();
        if (strategy == ContextStrategy::recent_k || strategy == ContextStrategy::popular_k) {
          ctx.strategy = ContextStrategy::state_only;  // peer comments are not replayed for NLL
        }
        req.prompt = render_policy_prompt(step.states[i], ctx, ctx.strategy, {caps.final_text_only});
      }
      const auto lp = policy.logprob(step.actions[i].text, req);
      if (!lp) throw CapabilityError("backend " + policy.name() + " returned no log-probability");
      total -= *lp;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

}  // namespace

Evaluation evaluate(const Trajectory& real, const Trajectory& generated, const Judge& judge,
                    const DimensionSchema& schema, const GenerativeBackend* policy, const EvalOptions& options) {
  schema.validate();
  if (options.window == 0) throw ArgumentError("window must be >= 1");
  if (real.event_id != generated.event_id) {
    throw ArgumentError("trajectories belong to different events: " + real.event_id + " vs " +
                        generated.event_id);
  }
  const std::size_t first = options.first_step.value_or(generated.config.effective_warmup() + 1);
  const std::size_t last = std::min(real.steps.size(), generated.steps.size());
  if (first >= last) {
    throw ArgumentError("no evaluated steps: first step " + std::to_string(first) + ", overlap " +
                        std::to_string(last));
  }

  const auto rs = flatten(real, first, last);
  const auto gs = flatten(generated, first, last);
  if (rs.actions.empty() || gs.actions.empty()) throw ArgumentError("evaluated steps hold no actions");
  const auto rl = classify_actions(rs.actions, judge, schema, real.topic);
  const auto gl = classify_actions(gs.actions, judge, schema, generated.topic);

  Evaluation ev;
  for (std::size_t t = first; t < last; ++t) ev.steps.push_back(t);
  ev.real = sample_steps(window_distribution(rl.labels, schema, options.window, options.exec), rs.step_end);
  ev.generated = sample_steps(window_distribution(gl.labels, schema, options.window, options.exec), gs.step_end);

  auto& rep = ev.report;
  rep.event_id = real.event_id;
  rep.window = options.window;
  rep.first_step = first;
  rep.steps = last - first;
  rep.judge_failures = rl.failed_batches + gl.failed_batches;

  std::vector<MetricValues> valid;
  for (std::size_t d = 0; d < schema.dimensions.size(); ++d) {
    const std::size_t L = schema.dimensions[d].labels.size();
    const auto& rt = ev.real.dims[d];
    const auto& gt = ev.generated.dims[d];
    std::vector<double> kls, w1s;
    std::vector<std::size_t> comparable;
    for (std::size_t k = 0; k < ev.steps.size(); ++k) {
      if (rt.empty[k] || gt.empty[k]) continue;
      comparable.push_back(k);
      kls.push_back(kl_divergence(rt.vectors[k], gt.vectors[k]));
      w1s.push_back(wasserstein1(rt.vectors[k], gt.vectors[k]));
    }
    DimensionMetrics dm{schema.dimensions[d].name, std::nullopt};
    if (!comparable.empty()) {
      MetricValues v;
      v.kl = mean(kls);
      v.wasserstein = mean(w1s);
      std::vector<std::vector<double>> ra(L), ga(L);
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t k : comparable) {
          ra[l].push_back(rt.vectors[k][l]);
          ga[l].push_back(gt.vectors[k][l]);
        }
      }
      v.dtw = mean(dtw_batch(ra, ga, options.exec));
      std::vector<std::vector<int>> rsteps, gsteps;
      for (std::size_t k = 0; k < ev.steps.size(); ++k) {
        const std::size_t rb = k == 0 ? 0 : rs.step_end[k - 1];
        const std::size_t gb = k == 0 ? 0 : gs.step_end[k - 1];
        std::vector<int> r, g;
        for (std::size_t i = rb; i < rs.step_end[k]; ++i) r.push_back(rl.labels[i].labels[d]);
        for (std::size_t i = gb; i < gs.step_end[k]; ++i) g.push_back(gl.labels[i].labels[d]);
        rsteps.push_back(std::move(r));
        gsteps.push_back(std::move(g));
      }
      const auto f1 = f1_scores(rsteps, gsteps, L);
      v.macro_f1 = f1.macro;
      v.micro_f1 = f1.micro;
      dm.values = v;
      valid.push_back(v);
    }
    rep.dimensions.push_back(std::move(dm));
  }
  if (valid.empty()) throw ArgumentError("no dimension had comparable windows");
  for (const auto& v : valid) {
    const double n = static_cast<double>(valid.size());
    rep.aggregate.kl += v.kl / n;
    rep.aggregate.wasserstein += v.wasserstein / n;
    rep.aggregate.dtw += v.dtw / n;
    rep.aggregate.macro_f1 += v.macro_f1 / n;
    rep.aggregate.micro_f1 += v.micro_f1 / n;
  }
  if (policy) rep.nll = report_nll(real, generated, *policy, first, last);
  return ev;
}

MetricReport evaluate_run(const Trajectory& real, const Trajectory& generated, const Judge& judge,
                          const DimensionSchema& schema, const GenerativeBackend* policy,
                          const EvalOptions& options) {
  return evaluate(real, generated, judge, schema, policy, options).report;
}

void inverse_normalize(std::vector<MetricReport>& reports) {
  if (reports.empty()) return;
  const auto norm = [&](auto get) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : reports) {
      lo = std::min(lo, get(r));
      hi = std::max(hi, get(r));
    }
    std::vector<double> out;
    for (const auto& r : reports) out.push_back(hi == lo ? 1.0 : (hi - get(r)) / (hi - lo));
    return out;
  };
  const auto kl = norm([](const MetricReport& r) { return r.aggregate.kl; });
  const auto w1 = norm([](const MetricReport& r) { return r.aggregate.wasserstein; });
  const auto dtw = norm([](const MetricReport& r) { return r.aggregate.dtw; });
  const bool all_nll = std::all_of(reports.begin(), reports.end(), [](const MetricReport& r) { return r.nll.has_value(); });
  std::vector<double> nll;
  if (all_nll) nll = norm([](const MetricReport& r) { return *r.nll; });
  for (std::size_t i = 0; i < reports.size(); ++i) {
    RadarValues rv;
    rv.kl = kl[i];
    rv.wasserstein = w1[i];
    rv.dtw = dtw[i];
    if (all_nll) rv.nll = nll[i];
    rv.macro_f1 = reports[i].aggregate.macro_f1;
    rv.micro_f1 = reports[i].aggregate.micro_f1;
    reports[i].radar = rv;
  }
}

namespace {

nlohmann::json values_json(const MetricValues& v) {
  return {{"kl", v.kl}, {"wasserstein", v.wasserstein}, {"dtw", v.dtw}, {"macro_f1", v.macro_f1},
          {"micro_f1", v.micro_f1}};
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["event_id"] = event_id;
  if (!label.empty()) j["label"] = label;
  j["window"] = window;
  j["first_step"] = first_step;
  j["steps"] = steps;
  auto dims = nlohmann::json::object();
  for (const auto& d : dimensions) dims[d.name] = d.values ? values_json(*d.values) : nlohmann::json(nullptr);
  j["dimensions"] = std::move(dims);
  j["aggregate"] = values_json(aggregate);
  j["nll"] = nll ? nlohmann::json(*nll) : nlohmann::json(nullptr);
  j["judge_failures"] = judge_failures;
  if (radar) {
    j["radar"] = {{"kl", radar->kl},
                  {"wasserstein", radar->wasserstein},
                  {"dtw", radar->dtw},
                  {"nll", radar->nll ? nlohmann::json(*radar->nll) : nlohmann::json(nullptr)},
                  {"macro_f1", radar->macro_f1},
                  {"micro_f1", radar->micro_f1}};
  }
  return j;
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "dimension,metric,value\n";
  const auto rows = [&](const std::string& name, const MetricValues& v) {
    out << name << ",kl," << v.kl << '\n'
        << name << ",wasserstein," << v.wasserstein << '\n'
        << name << ",dtw," << v.dtw << '\n'
        << name << ",macro_f1," << v.macro_f1 << '\n'
        << name << ",micro_f1," << v.micro_f1 << '\n';
  };
  for (const auto& d : dimensions) {
    if (d.values) rows(d.name, *d.values);
  }
  rows("aggregate", aggregate);
  if (nll) out << "aggregate,nll," << *nll << '\n';
  if (radar) {
    out << "radar,kl," << radar->kl << '\n'
        << "radar,wasserstein," << radar->wasserstein << '\n'
        << "radar,dtw," << radar->dtw << '\n';
    if (radar->nll) out << "radar,nll," << *radar->nll << '\n';
    out << "radar,macro_f1," << radar->macro_f1 << '\n' << "radar,micro_f1," << radar->micro_f1 << '\n';
  }
  return out.str();
}

std::string series_csv(const Evaluation& evaluation, const DimensionSchema& schema) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,dimension,label,real,generated\n";
  for (std::size_t k = 0; k < evaluation.steps.size(); ++k) {
    for (std::size_t d = 0; d < schema.dimensions.size(); ++d) {
      const auto& rt = evaluation.real.dims[d];
      const auto& gt = evaluation.generated.dims[d];
      for (std::size_t l = 0; l < schema.dimensions[d].labels.size(); ++l) {
        out << evaluation.steps[k] << ',' << schema.dimensions[d].name << ','
            << schema.dimensions[d].labels[l] << ',';
        if (!rt.empty[k]) out << rt.vectors[k][l];
        out << ',';
        if (!gt.empty[k]) out << gt.vectors[k][l];
        out << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace mfsim
