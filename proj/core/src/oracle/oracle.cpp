#include "codespot/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "codespot/util/error.hpp"

namespace codespot::oracle {

LeaveOneOutResult leave_one_out(const model::ModelState& model,
                                std::span<const corpus::TokenBatch> batches,
                                std::optional<std::span<const std::size_t>> subset) {
  const std::size_t d = model.parameters.size();
  LeaveOneOutResult out;
  if (subset) {
    out.indices.assign(subset->begin(), subset->end());
    for (std::size_t j : out.indices) {
      if (j >= d) fail(ErrorKind::kContract, fmt::format("scalar index {} out of range {}", j, d));
    }
  } else {
    out.indices.resize(d);
    std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
  }
  out.base_loss = model::evaluate_mean_loss(model, batches);
  if (!std::isfinite(out.base_loss)) fail(ErrorKind::kNumeric, "non-finite base loss");

  model::ModelState work = model;
  out.true_delta.reserve(out.indices.size());
  for (std::size_t j : out.indices) {
    const double saved = work.parameters[j];
    if (saved == 0.0) {
      out.true_delta.push_back(0.0);
      continue;
    }
    work.parameters[j] = 0.0;
    double loss = 0.0;
    try {
      loss = model::evaluate_mean_loss(work, batches);
    } catch (const Error& e) {
      fail(e.kind(), fmt::format("leave-one-out at scalar {}: {}", j, e.what()));
    }
    work.parameters[j] = saved;
    if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, fmt::format("non-finite loss with scalar {} zeroed", j));
    out.true_delta.push_back(std::abs(loss - out.base_loss));
  }
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kContract, "spearman: length mismatch");
  if (a.size() < 2) fail(ErrorKind::kContract, "spearman needs at least two values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double x = ra[i] - mean;
    const double y = rb[i] - mean;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorKind::kDegenerate, "spearman: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<std::size_t> topk_indices(std::span<const double> values, std::size_t k_count) {
  if (k_count > values.size()) fail(ErrorKind::kContract, "top-k count exceeds length");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_count), idx.end(),
                    [&](std::size_t x, std::size_t y) {
                      return values[x] > values[y] || (values[x] == values[y] && x < y);
                    });
  idx.resize(k_count);
  return idx;
}

double topk_overlap(std::span<const double> a, std::span<const double> b, std::size_t k_count) {
  if (a.size() != b.size()) fail(ErrorKind::kContract, "topk_overlap: length mismatch");
  if (k_count == 0) fail(ErrorKind::kContract, "topk_overlap: k_count must be positive");
  auto ta = topk_indices(a, k_count);
  auto tb = topk_indices(b, k_count);
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::vector<std::size_t> common;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(k_count);
}

std::string leave_one_out_csv(const model::ParameterRegistry& registry, const LeaveOneOutResult& loo,
                              std::span<const double> importance) {
  std::string out = "index,param,offset,importance,true_delta\n";
  for (std::size_t i = 0; i < loo.indices.size(); ++i) {
    const std::size_t j = loo.indices[i];
    const auto& e = registry.entry_for_scalar(j);
    out += fmt::format("{},{},{},{:.17g},{:.17g}\n", j, e.name, j - e.offset,
                       j < importance.size() ? importance[j] : 0.0, loo.true_delta[i]);
  }
  return out;
}

std::vector<double> mean_loss_gradient(const model::ModelState& model,
                                       std::span<const corpus::TokenBatch> batches) {
  std::vector<double> grad(model.parameters.size(), 0.0);
  std::size_t total = 0;
  for (const auto& b : batches) total += b.target_count();
  if (total == 0) fail(ErrorKind::kData, "no target positions in batches");
  for (const auto& b : batches) {
    const auto lg = model::loss_and_gradient(model, b);
    const double w = static_cast<double>(b.target_count()) / static_cast<double>(total);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += w * lg.gradient[j];
  }
  return grad;
}

std::vector<TaylorProbe> taylor_probes(const model::ModelState& model,
                                       std::span<const corpus::TokenBatch> batches,
                                       double max_abs_theta, std::size_t max_probes) {
  const auto grad = mean_loss_gradient(model, batches);
  // Changes below this are lost in the rounding of the loss itself.
  const double floor = kTaylorResolution * std::abs(model::evaluate_mean_loss(model, batches));
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < grad.size(); ++j) {
    const double t = std::abs(model.parameters[j]);
    if (t > 0.0 && t <= max_abs_theta && grad[j] != 0.0) candidates.push_back(j);
  }
  std::vector<double> first_order(grad.size(), 0.0);
  for (std::size_t j : candidates) first_order[j] = std::abs(grad[j] * model.parameters[j]);
  std::erase_if(candidates, [&](std::size_t j) { return first_order[j] < floor; });
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return first_order[a] > first_order[b]; });
  if (candidates.size() > max_probes) candidates.resize(max_probes);

  const auto loo = leave_one_out(model, batches, std::span<const std::size_t>(candidates));
  std::vector<TaylorProbe> probes;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::size_t j = candidates[i];
    TaylorProbe p;
    p.index = j;
    p.theta = model.parameters[j];
    p.first_order = first_order[j];
    p.true_delta = loo.true_delta[i];
    p.rel_error = std::abs(p.true_delta - p.first_order) / p.first_order;
    probes.push_back(p);
  }
  return probes;
}

}  // namespace codespot::oracle
