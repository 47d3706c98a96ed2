#include "tutorqa/calibration_io.hpp"

#include "tutorqa/util.hpp"

namespace tutorqa {

using nlohmann::json;

namespace {

json thresholds_json(const FeatureThresholds& t) { return {{"lt", t.lt}, {"ht", t.ht}}; }

FeatureThresholds thresholds_from(const json& j) {
  return {j.at("lt").get<double>(), j.at("ht").get<double>()};
}

}  // namespace

json to_json(const Calibration& c) {
  json doc{{"format", "tutorqa-calibration"},
           {"format_version", kCalibrationFormatVersion},
           {"method", c.method},
           {"sample_count", c.sample_count}};
  if (c.thresholds) {
    doc["thresholds"] = {{"r2", thresholds_json(c.thresholds->r2)},
                         {"bs", thresholds_json(c.thresholds->bs)}};
    doc["combiner"] = to_string(c.combiner);
    doc["bins"] = c.bins;
  }
  if (c.cluster) {
    const auto& m = *c.cluster;
    json centroids = json::array();
    for (Eigen::Index i = 0; i < m.centroids.rows(); ++i) {
      centroids.push_back({{"r2", m.centroids(i, 0)},
                           {"bs", m.centroids(i, 1)},
                           {"class", to_string(m.centroid_class[static_cast<std::size_t>(i)])}});
    }
    json training = json::array();
    for (Eigen::Index i = 0; i < m.training.rows(); ++i) {
      training.push_back(json::array({m.training(i, 0), m.training(i, 1),
                                      to_string(m.training_class[static_cast<std::size_t>(i)])}));
    }
    doc["kmeans"] = {{"k", m.k}, {"seed", m.seed}, {"k_neighbors", c.k_neighbors},
                     {"centroids", centroids}, {"training", training}};
  }
  return doc;
}

Calibration calibration_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "tutorqa-calibration") throw ParseError("not a calibration file");
    const int version = doc.at("format_version").get<int>();
    if (version != kCalibrationFormatVersion) {
      throw ParseError(fmt::format("unsupported calibration format_version {}", version));
    }
    Calibration c;
    c.method = doc.at("method").get<std::string>();
    c.sample_count = doc.value("sample_count", std::size_t{0});
    if (auto it = doc.find("thresholds"); it != doc.end()) {
      c.thresholds = ThresholdSet{thresholds_from(it->at("r2")), thresholds_from(it->at("bs"))};
      validate(*c.thresholds);
      c.combiner = parse_combiner(doc.value("combiner", std::string("min")));
      c.bins = doc.value("bins", 256);
    }
    if (auto it = doc.find("kmeans"); it != doc.end()) {
      ClusterModel m;
      m.k = it->at("k").get<int>();
      m.seed = it->at("seed").get<std::uint64_t>();
      c.k_neighbors = it->value("k_neighbors", 5);
      const auto& cents = it->at("centroids");
      m.centroids.resize(static_cast<Eigen::Index>(cents.size()), 2);
      for (std::size_t i = 0; i < cents.size(); ++i) {
        m.centroids(static_cast<Eigen::Index>(i), 0) = cents[i].at("r2").get<double>();
        m.centroids(static_cast<Eigen::Index>(i), 1) = cents[i].at("bs").get<double>();
        m.centroid_class.push_back(parse_quality_class(cents[i].at("class").get<std::string>()));
      }
      const auto& train = it->at("training");
      m.training.resize(static_cast<Eigen::Index>(train.size()), 2);
      for (std::size_t i = 0; i < train.size(); ++i) {
        m.training(static_cast<Eigen::Index>(i), 0) = train[i].at(0).get<double>();
        m.training(static_cast<Eigen::Index>(i), 1) = train[i].at(1).get<double>();
        m.training_class.push_back(parse_quality_class(train[i].at(2).get<std::string>()));
      }
      if (!m.trained()) throw ParseError("calibration: k-means model has no training points");
      c.cluster = std::move(m);
    }
    if (!c.thresholds && !c.cluster) throw ParseError("calibration has neither thresholds nor k-means model");
    return c;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("calibration: {}", e.what()));
  }
}

void save_calibration(const Calibration& c, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(c).dump(2) + "\n");
}

Calibration load_calibration(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return calibration_from_json(doc);
}

}  // namespace tutorqa
