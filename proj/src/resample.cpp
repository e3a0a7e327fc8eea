#include "severitas/resample.hpp"

#include <algorithm>
#include <numeric>

#include "severitas/errors.hpp"

namespace severitas {

using nlohmann::json;

void ResampleConfig::validate() const {
  if (k_smote < 1) throw ArgumentError("k_smote must be >= 1");
  if (k_enn < 1) throw ArgumentError("k_enn must be >= 1");
  if (k_enn % 2 == 0) throw ArgumentError("k_enn must be odd");
}

ResampleConfig ResampleConfig::from_json(const json& j) {
  ResampleConfig c;
  try {
    c.k_smote = j.value("k_smote", c.k_smote);
    c.k_enn = j.value("k_enn", c.k_enn);
    c.seed = j.value("seed", c.seed);
    if (j.contains("target") && !j.at("target").is_null()) {
      std::array<std::size_t, kNumClasses> t{};
      for (int cls = 0; cls < kNumClasses; ++cls) {
        t[static_cast<std::size_t>(cls)] = j.at("target").at(std::string(severity_name(cls))).get<std::size_t>();
      }
      c.target = t;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("resample config: ") + e.what());
  }
  c.validate();
  return c;
}

json ResampleConfig::to_json() const {
  json j{{"k_smote", k_smote}, {"k_enn", k_enn}, {"seed", seed}};
  if (target) {
    for (int cls = 0; cls < kNumClasses; ++cls) {
      j["target"][std::string(severity_name(cls))] = (*target)[static_cast<std::size_t>(cls)];
    }
  }
  return j;
}

json ResampleReport::to_json() const {
  json j = json::object();
  for (int cls = 0; cls < kNumClasses; ++cls) {
    const auto& c = classes[static_cast<std::size_t>(cls)];
    j[std::string(severity_name(cls))] = {{"before", c.before},
                                          {"after_smote", c.after_smote},
                                          {"after_enn", c.after_enn},
                                          {"removed", c.removed},
                                          {"synthesized", c.synthesized}};
  }
  return j;
}

ResampleReport ResampleReport::from_json(const json& j) {
  ResampleReport r;
  for (int cls = 0; cls < kNumClasses; ++cls) {
    const auto& jc = j.at(std::string(severity_name(cls)));
    auto& c = r.classes[static_cast<std::size_t>(cls)];
    c.before = jc.at("before").get<std::size_t>();
    c.after_smote = jc.at("after_smote").get<std::size_t>();
    c.after_enn = jc.at("after_enn").get<std::size_t>();
    c.removed = jc.at("removed").get<std::size_t>();
    c.synthesized = jc.at("synthesized").get<std::size_t>();
  }
  return r;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<std::size_t> knn_indices(const Dataset& points, std::span<const double> query, std::size_t k,
                                     std::span<const std::size_t> pool, std::optional<std::size_t> exclude) {
  if (query.size() != points.width) throw ShapeError("knn_indices: query width does not match points");
  std::vector<std::pair<double, std::size_t>> cand;
  auto consider = [&](std::size_t i) {
    if (exclude && *exclude == i) return;
    cand.emplace_back(squared_distance(points.row(i), query), i);
  };
  if (pool.empty()) {
    cand.reserve(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) consider(i);
  } else {
    cand.reserve(pool.size());
    for (std::size_t i : pool) consider(i);
  }
  if (k > cand.size()) {
    throw ArgumentError("knn_indices: k = " + std::to_string(k) + " exceeds the " + std::to_string(cand.size()) +
                        " eligible points");
  }
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = cand[i].second;
  return out;
}

SmoteResult smote_oversample(const Dataset& train, const ResampleConfig& config, Rng& rng) {
  config.validate();
  const auto counts = train.class_counts();
  std::array<std::size_t, kNumClasses> target{};
  if (config.target) {
    target = *config.target;
  } else {
    target.fill(*std::max_element(counts.begin(), counts.end()));
  }

  SmoteResult result;
  result.data = train;
  result.data.splits.clear();
  std::vector<double> synthetic(train.width);
  for (int cls = 0; cls < kNumClasses; ++cls) {
    const auto c = static_cast<std::size_t>(cls);
    if (counts[c] == 0 || counts[c] >= target[c]) continue;
    if (counts[c] < 2) {
      throw ResampleError("class " + std::string(severity_name(cls)) + " has a single sample; SMOTE needs at least 2");
    }
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      if (train.labels[i] == cls) members.push_back(i);
    }
    const std::size_t k = std::min(config.k_smote, members.size() - 1);
    std::vector<std::vector<std::size_t>> neighbours(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
      neighbours[m] = knn_indices(train, train.row(members[m]), k, members, members[m]);
    }
    const std::size_t needed = target[c] - counts[c];
    for (std::size_t s = 0; s < needed; ++s) {
      const std::size_t m = static_cast<std::size_t>(rng.below(members.size()));
      const std::size_t nn = neighbours[m][static_cast<std::size_t>(rng.below(k))];
      const double u = rng.uniform();
      auto base = train.row(members[m]);
      auto other = train.row(nn);
      for (std::size_t j = 0; j < train.width; ++j) synthetic[j] = base[j] + u * (other[j] - base[j]);
      result.data.append(synthetic, cls);
      result.origins.push_back({members[m], nn, u});
    }
    result.synthesized[c] = needed;
  }
  return result;
}

EnnResult enn_edit(const Dataset& data, const ResampleConfig& config) {
  config.validate();
  if (config.k_enn >= data.rows()) {
    throw ArgumentError("enn_edit: k_enn = " + std::to_string(config.k_enn) + " needs more than " +
                        std::to_string(data.rows()) + " samples");
  }
  EnnResult result;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto nn = knn_indices(data, data.row(i), config.k_enn, {}, i);
    std::array<std::size_t, kNumClasses> votes{};
    for (std::size_t j : nn) ++votes[static_cast<std::size_t>(data.labels[j])];
    const int own = data.labels[i];
    bool outvoted = false;
    for (int cls = 0; cls < kNumClasses; ++cls) {
      if (cls != own && votes[static_cast<std::size_t>(cls)] > votes[static_cast<std::size_t>(own)]) outvoted = true;
    }
    if (outvoted) {
      result.removed.push_back(i);
      ++result.removed_per_class[static_cast<std::size_t>(own)];
    } else {
      keep.push_back(i);
    }
  }
  result.data = data.select(keep);
  return result;
}

SmoteEnnResult smoteenn(const Dataset& train, const ResampleConfig& config, Rng& rng) {
  SmoteEnnResult out;
  const auto before = train.class_counts();
  SmoteResult smote = smote_oversample(train, config, rng);
  const auto after_smote = smote.data.class_counts();
  EnnResult enn = enn_edit(smote.data, config);
  const auto after_enn = enn.data.class_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.report.classes[c] = {before[c], after_smote[c], after_enn[c], enn.removed_per_class[c], smote.synthesized[c]};
  }
  out.data = std::move(enn.data);
  return out;
}

}  // namespace severitas
