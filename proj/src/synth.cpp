#include "severitas/synth.hpp"

#include <cmath>

#include "severitas/errors.hpp"
#include "severitas/io.hpp"
#include "severitas/rng.hpp"

namespace severitas {

using nlohmann::json;

namespace {

const std::array<std::string_view, 8> kCategoricalNames{"light_condition", "weather",     "surface_condition",
                                                        "road_class",      "intersection", "collision_type",
                                                        "speed_band",      "vehicle_type"};
const std::array<std::string_view, 4> kNumericNames{"driver_age", "speed_limit", "vehicle_count", "lane_width"};

std::string categorical_name(std::size_t f) {
  if (f < kCategoricalNames.size()) return std::string(kCategoricalNames[f]);
  return "cat_" + std::to_string(f);
}

std::string numeric_name(std::size_t f) {
  if (f < kNumericNames.size()) return std::string(kNumericNames[f]);
  return "num_" + std::to_string(f);
}

}  // namespace

void SynthConfig::validate() const {
  std::size_t total = 0;
  for (auto c : class_counts) total += c;
  if (total == 0) throw ConfigError("synth: no rows requested");
  if (categorical_fields + numeric_fields + noise_fields == 0) throw ConfigError("synth: no feature fields");
  if (categories < 2) throw ConfigError("synth: categories must be >= 2");
  if (!(purity >= 0.0 && purity <= 1.0)) throw ConfigError("synth: purity must be in [0, 1]");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw ConfigError("synth: label_noise must be in [0, 1]");
  if (!(numeric_stddev > 0.0)) throw ConfigError("synth: numeric_stddev must be positive");
  if (informative_fields > categorical_fields) throw ConfigError("synth: informative_fields exceeds categorical_fields");
  if (years < 1) throw ConfigError("synth: years must be >= 1");
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
  try {
    c.class_counts = j.value("class_counts", c.class_counts);
    c.categorical_fields = j.value("categorical_fields", c.categorical_fields);
    c.categories = j.value("categories", c.categories);
    c.numeric_fields = j.value("numeric_fields", c.numeric_fields);
    c.noise_fields = j.value("noise_fields", c.noise_fields);
    c.informative_fields = j.value("informative_fields", c.informative_fields);
    c.purity = j.value("purity", c.purity);
    c.separation = j.value("separation", c.separation);
    c.numeric_stddev = j.value("numeric_stddev", c.numeric_stddev);
    c.label_noise = j.value("label_noise", c.label_noise);
    c.first_year = j.value("first_year", c.first_year);
    c.years = j.value("years", c.years);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

json SynthConfig::to_json() const {
  return json{{"class_counts", class_counts},
              {"categorical_fields", categorical_fields},
              {"categories", categories},
              {"numeric_fields", numeric_fields},
              {"noise_fields", noise_fields},
              {"informative_fields", informative_fields},
              {"purity", purity},
              {"separation", separation},
              {"numeric_stddev", numeric_stddev},
              {"label_noise", label_noise},
              {"first_year", first_year},
              {"years", years},
              {"seed", seed}};
}

SynthConfig SynthConfig::preset(std::string_view name) {
  SynthConfig c;
  if (name == "separable") return c;
  if (name == "imbalanced") {
    // Overlapping classes with a rare minority; the minority is easy to
    // swamp without resampling.
    c.class_counts = {900, 60, 540};
    c.purity = 0.45;
    c.separation = 0.6;
    c.label_noise = 0.0;
    return c;
  }
  if (name == "one_informative") {
    c.class_counts = {400, 400, 400};
    c.categorical_fields = 4;
    c.categories = 3;
    c.numeric_fields = 2;
    c.informative_fields = 1;
    c.purity = 1.0;
    c.separation = 0.0;
    c.noise_fields = 1;
    return c;
  }
  throw ConfigError("synth: unknown preset '" + std::string(name) + "'");
}

SynthData generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng = Rng::derive(config.seed, "synth");

  std::vector<int> labels;
  for (int c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), config.class_counts[c], c);
  rng.shuffle(labels);

  const std::size_t n_inform = config.informative_fields == 0 ? config.categorical_fields : config.informative_fields;
  const bool numeric_informative = config.informative_fields == 0;

  SynthData out;
  std::vector<std::string> header;
  for (std::size_t f = 0; f < config.categorical_fields; ++f) {
    header.push_back(categorical_name(f));
    ColumnDecl d{header.back(), ColumnRole::categorical, {}};
    for (std::size_t v = 0; v < config.categories; ++v) d.categories.push_back("v" + std::to_string(v));
    out.schema.columns.push_back(std::move(d));
  }
  for (std::size_t f = 0; f < config.noise_fields; ++f) {
    header.push_back("noise_" + std::to_string(f));
    ColumnDecl d{header.back(), ColumnRole::categorical, {}};
    for (std::size_t v = 0; v < config.categories; ++v) d.categories.push_back("v" + std::to_string(v));
    out.schema.columns.push_back(std::move(d));
  }
  for (std::size_t f = 0; f < config.numeric_fields; ++f) {
    header.push_back(numeric_name(f));
    out.schema.columns.push_back({header.back(), ColumnRole::numerical, {}});
  }
  header.push_back("crash_year");
  header.push_back("crash_severity");
  out.schema.columns.push_back({"crash_severity", ColumnRole::label, {}});
  out.schema.year_column = "crash_year";

  out.csv = csv_join(header) + "\n";
  std::vector<std::string> cells;
  for (int label : labels) {
    cells.clear();
    for (std::size_t f = 0; f < config.categorical_fields; ++f) {
      std::size_t v;
      if (f < n_inform) {
        const std::size_t preferred = (static_cast<std::size_t>(label) + f) % config.categories;
        if (rng.uniform() < config.purity) {
          v = preferred;
        } else {
          v = static_cast<std::size_t>(rng.below(config.categories - 1));
          if (v >= preferred) ++v;
        }
      } else {
        v = static_cast<std::size_t>(rng.below(config.categories));
      }
      cells.push_back("v" + std::to_string(v));
    }
    for (std::size_t f = 0; f < config.noise_fields; ++f) {
      cells.push_back("v" + std::to_string(rng.below(config.categories)));
    }
    for (std::size_t f = 0; f < config.numeric_fields; ++f) {
      double mean = 0.0;
      if (numeric_informative) {
        // Classes sit at angles 2*pi*c/3 in a plane rotated per field.
        const double angle = 2.0 * M_PI * label / 3.0 + static_cast<double>(f);
        mean = config.separation * std::cos(angle);
      }
      cells.push_back(format_fixed(rng.normal(mean, config.numeric_stddev), 4));
    }
    cells.push_back(std::to_string(config.first_year + static_cast<int>(rng.below(config.years))));
    int shown = label;
    if (config.label_noise > 0.0 && rng.uniform() < config.label_noise) {
      shown = static_cast<int>(rng.below(kNumClasses));
    }
    cells.push_back(std::string(severity_name(shown)));
    out.csv += csv_join(cells) + "\n";
  }
  return out;
}

}  // namespace severitas
