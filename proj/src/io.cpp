#include "kaleido/io.hpp"

#include "kaleido/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace kaleido {

namespace {

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw InvalidInput(std::string(what) + " must be an array of three numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void check_schema(const Json& doc) {
  if (!doc.is_object()) {
    throw InvalidInput("document must be a JSON object");
  }
  if (!doc.contains("schema_version") || doc["schema_version"] != kSchemaVersion) {
    throw InvalidInput("unsupported or missing schema_version (expected " +
                       std::to_string(kSchemaVersion) + ")");
  }
}

// nlohmann reports type errors as its own exceptions; surface them as invalid input.
template <typename Body>
auto guarded(const char* what, Body&& body) {
  try {
    return body();
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed ") + what + ": " + e.what());
  }
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Json mirrors_to_json(const std::vector<Mirror>& mirrors) {
  Json out = Json::array();
  for (const auto& m : mirrors) {
    out.push_back({{"normal", vec_to_json(m.normal())}, {"distance", m.distance()}});
  }
  return out;
}

std::vector<Mirror> mirrors_from_json(const Json& doc) {
  return guarded("mirror list", [&] {
    std::vector<Mirror> out;
    for (const auto& m : doc) {
      out.push_back(Mirror::from_direction(vec_from_json(m.at("normal"), "normal"),
                                           m.at("distance").get<double>()));
    }
    return out;
  });
}

Json scene_to_json(const Scenario& scenario, const std::vector<Point3>& points) {
  const auto& c = scenario.config;
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["name"] = scenario.name;
  doc["camera"] = {{"fx", c.camera.fx}, {"fy", c.camera.fy}, {"cx", c.camera.cx},
                   {"cy", c.camera.cy}, {"width", c.camera.width}, {"height", c.camera.height}};
  doc["mirrors"] = mirrors_to_json(c.mirrors);
  doc["max_order"] = c.max_order;
  doc["seed"] = c.seed;
  doc["sigma"] = c.sigma;
  doc["nominal_point"] = vec_to_json(scenario.nominal_point);
  doc["half_extent"] = vec_to_json(scenario.half_extent);
  if (!points.empty()) {
    Json pts = Json::array();
    for (const auto& p : points) {
      pts.push_back(vec_to_json(p));
    }
    doc["points"] = pts;
  }
  return doc;
}

SceneFile scene_from_json(const Json& doc) {
  check_schema(doc);
  return guarded("scene config", [&] {
    SceneFile out;
    auto& c = out.scenario.config;
    out.scenario.name = doc.value("name", std::string("custom"));
    const auto& cam = doc.at("camera");
    c.camera.fx = cam.at("fx").get<double>();
    c.camera.fy = cam.at("fy").get<double>();
    c.camera.cx = cam.at("cx").get<double>();
    c.camera.cy = cam.at("cy").get<double>();
    c.camera.width = cam.at("width").get<int>();
    c.camera.height = cam.at("height").get<int>();
    c.mirrors = mirrors_from_json(doc.at("mirrors"));
    c.max_order = doc.value("max_order", 2);
    c.seed = doc.value("seed", std::uint64_t{0});
    c.sigma = doc.value("sigma", 0.0);
    if (doc.contains("nominal_point") && doc.contains("half_extent")) {
      out.scenario.nominal_point = vec_from_json(doc["nominal_point"], "nominal_point");
      out.scenario.half_extent = vec_from_json(doc["half_extent"], "half_extent");
      out.has_sampling_box = true;
    }
    if (doc.contains("points")) {
      for (const auto& p : doc["points"]) {
        out.points.push_back(vec_from_json(p, "point"));
      }
    }
    c.validate(false);
    return out;
  });
}

std::string candidates_to_csv(const std::vector<Pixel2>& candidates) {
  std::string out = "id,u,v\n";
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    out += std::to_string(k) + "," + number(candidates[k].u) + "," + number(candidates[k].v) + "\n";
  }
  return out;
}

std::vector<Pixel2> candidates_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,u,v", 0) != 0) {
    throw InvalidInput("candidate CSV must start with the header id,u,v");
  }
  std::vector<Pixel2> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    std::string id;
    std::string u;
    std::string v;
    if (!std::getline(fields, id, ',') || !std::getline(fields, u, ',') || !std::getline(fields, v)) {
      throw InvalidInput("candidate CSV row " + std::to_string(row) + " needs three fields");
    }
    try {
      std::size_t used = 0;
      if (std::stoul(id, &used) != row || used != id.size()) {
        throw InvalidInput("candidate ids must be 0, 1, 2, ... in order");
      }
      out.push_back({std::stod(u), std::stod(v)});
    } catch (const std::logic_error&) {
      throw InvalidInput("candidate CSV row " + std::to_string(row) + " is not numeric");
    }
    ++row;
  }
  return out;
}

Json observations_to_json(const std::vector<LabeledProjection>& observations,
                          std::size_t num_mirrors,
                          const std::vector<std::optional<std::size_t>>& candidate_ids) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["num_mirrors"] = num_mirrors;
  Json list = Json::array();
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const auto& obs = observations[k];
    Json o = {{"landmark", obs.landmark},
              {"label", obs.label.to_string(num_mirrors)},
              {"u", obs.pixel.u},
              {"v", obs.pixel.v}};
    if (k < candidate_ids.size() && candidate_ids[k]) {
      o["candidate"] = *candidate_ids[k];
    }
    list.push_back(o);
  }
  doc["observations"] = list;
  return doc;
}

std::vector<LabeledProjection> observations_from_json(const Json& doc, std::size_t num_mirrors) {
  check_schema(doc);
  return guarded("observations", [&] {
    std::vector<LabeledProjection> out;
    const auto read = [&](const Json& o, std::size_t landmark) {
      LabeledProjection p;
      p.landmark = landmark;
      p.label = ReflectionSequence::parse(o.at("label").get<std::string>(), num_mirrors);
      p.pixel = {o.at("u").get<double>(), o.at("v").get<double>()};
      out.push_back(std::move(p));
    };
    // Flat list with a landmark field per entry, or entries grouped by landmark id.
    if (doc.contains("landmarks")) {
      for (const auto& group : doc.at("landmarks")) {
        const auto id = group.at("id").get<std::size_t>();
        for (const auto& o : group.at("observations")) {
          read(o, id);
        }
      }
    } else {
      for (const auto& o : doc.at("observations")) {
        read(o, o.at("landmark").get<std::size_t>());
      }
    }
    return out;
  });
}

Json pruning_to_json(const PruningCounts& c) {
  return {{"total", c.total}, {"kpc", c.kpc},     {"prop1", c.prop1},
          {"prop2", c.prop2}, {"joint", c.joint}, {"all", c.all}};
}

Json assignment_to_json(const AssignmentResult& result, const std::vector<Pixel2>& candidates,
                        std::size_t num_mirrors) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  // Labels keyed by candidate id; unlabeled candidates are omitted.
  Json labels = Json::object();
  for (const auto& [k, label] : result.labels) {
    labels[std::to_string(k)] = label.to_string(num_mirrors);
  }
  doc["labels"] = labels;
  Json points = Json::array();
  for (const auto& q : candidates) {
    points.push_back({q.u, q.v});
  }
  doc["candidates"] = points;
  doc["mirrors"] = mirrors_to_json(result.mirrors);
  doc["p0"] = vec_to_json(result.p0);
  doc["recall"] = result.recall;
  doc["matched"] = result.matched;
  doc["residual"] = result.residual;
  doc["hypothesis_index"] = result.hypothesis_index;
  Json base = Json::array();
  for (const auto& d : result.hypothesis.doublets) {
    base.push_back(Json::array({d.un_reflected, d.reflected}));
  }
  doc["base_structure"] = base;
  doc["pruning_counts"] = pruning_to_json(result.pruning);
  return doc;
}

std::string assignment_to_csv(const AssignmentResult& result, const std::vector<Pixel2>& candidates,
                              std::size_t num_mirrors) {
  std::string out = "id,u,v,label\n";
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto it = result.labels.find(k);
    out += std::to_string(k) + "," + number(candidates[k].u) + "," + number(candidates[k].v) + "," +
           (it == result.labels.end() ? "" : it->second.to_string(num_mirrors)) + "\n";
  }
  return out;
}

Json estimate_to_json(const CalibrationEstimate& estimate) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["unit_first_distance"] = estimate.unit_first_distance;
  doc["mirrors"] = mirrors_to_json(estimate.mirrors);
  Json pts = Json::array();
  for (const auto& p : estimate.points) {
    pts.push_back(vec_to_json(p));
  }
  doc["points"] = pts;
  return doc;
}

CalibrationEstimate estimate_from_json(const Json& doc) {
  check_schema(doc);
  return guarded("estimate", [&] {
    CalibrationEstimate out;
    out.mirrors = mirrors_from_json(doc.at("mirrors"));
    for (const auto& p : doc.at("points")) {
      out.points.push_back(vec_from_json(p, "point"));
    }
    out.unit_first_distance = doc.value("unit_first_distance", false);
    return out;
  });
}

Json reference_to_json(const ReferenceObject& reference, std::size_t num_mirrors) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  Json landmarks = Json::array();
  for (const auto& p : reference.landmarks) {
    landmarks.push_back(vec_to_json(p));
  }
  doc["landmarks"] = landmarks;
  Json chambers = Json::object();
  for (const auto& [label, list] : reference.correspondences) {
    Json entries = Json::array();
    for (const auto& [index, pixel] : list) {
      entries.push_back({{"landmark", index}, {"u", pixel.u}, {"v", pixel.v}});
    }
    chambers[label.to_string(num_mirrors)] = entries;
  }
  doc["correspondences"] = chambers;
  return doc;
}

ReferenceObject reference_from_json(const Json& doc, std::size_t num_mirrors) {
  check_schema(doc);
  return guarded("reference object", [&] {
    ReferenceObject out;
    for (const auto& p : doc.at("landmarks")) {
      out.landmarks.push_back(vec_from_json(p, "landmark"));
    }
    for (const auto& [key, entries] : doc.at("correspondences").items()) {
      auto& list = out.correspondences[ReflectionSequence::parse(key, num_mirrors)];
      for (const auto& e : entries) {
        list.emplace_back(e.at("landmark").get<std::size_t>(),
                          Pixel2{e.at("u").get<double>(), e.at("v").get<double>()});
      }
    }
    return out;
  });
}

Json trial_to_json(const TrialRecord& t) {
  Json doc = {{"cell", t.cell},
              {"value", t.value},
              {"trial", t.trial},
              {"method", std::string(method_name(t.method))},
              {"success", t.success}};
  if (!t.error.empty()) {
    doc["error"] = t.error;
  }
  if (is_calibration(t.method)) {
    doc["E_n"] = t.e_n;
    doc["E_d"] = t.e_d;
    doc["E_rep"] = t.e_rep;
    doc["N_iter"] = t.n_iter;
    doc["cost_monotone"] = t.cost_monotone;
  } else {
    doc["E_m"] = t.e_m;
  }
  if (t.pruning) {
    doc["pruning"] = pruning_to_json(*t.pruning);
  }
  return doc;
}

Json sweep_to_json(const SweepReport& report) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["scenario"] = report.scenario;
  doc["variable"] = std::string(variable_name(report.variable));
  doc["max_order"] = report.max_order;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row = {{"cell", r.cell},
                {"value", r.value},
                {"method", std::string(method_name(r.method))},
                {"trials", r.trials},
                {"successes", r.successes},
                {"flagged", r.flagged}};
    if (is_calibration(r.method)) {
      row["E_n"] = r.e_n;
      row["E_d"] = r.e_d;
      row["E_rep"] = r.e_rep;
      row["N_iter"] = r.n_iter;
    } else {
      row["E_m"] = r.e_m;
      row["pruning"] = r.pruning;
    }
    rows.push_back(row);
  }
  doc["rows"] = rows;
  Json trials = Json::array();
  for (const auto& t : report.trials) {
    trials.push_back(trial_to_json(t));
  }
  doc["trials"] = trials;
  return doc;
}

Json prune_stats_to_json(const std::string& scenario, const std::vector<PruneTrial>& trials) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["scenario"] = scenario;
  Json list = Json::array();
  std::size_t with_truth = 0;
  for (const auto& t : trials) {
    list.push_back({{"trial", t.trial},
                    {"point", vec_to_json(t.point)},
                    {"counts", pruning_to_json(t.counts)},
                    {"true_survivors", t.true_survivors}});
    with_truth += t.true_survivors > 0 ? 1 : 0;
  }
  doc["trials"] = list;
  doc["trials_with_true_survivor"] = with_truth;
  return doc;
}

std::string prune_stats_to_csv(const std::vector<PruneTrial>& trials) {
  std::string out = "trial,total,kpc,prop1,prop2,joint,all,true_survivors\n";
  for (const auto& t : trials) {
    const auto& c = t.counts;
    out += std::to_string(t.trial) + "," + std::to_string(c.total) + "," + std::to_string(c.kpc) +
           "," + std::to_string(c.prop1) + "," + std::to_string(c.prop2) + "," +
           std::to_string(c.joint) + "," + std::to_string(c.all) + "," +
           std::to_string(t.true_survivors) + "\n";
  }
  return out;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(std::string("invalid JSON: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInput("cannot read " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InvalidInput("cannot write " + path);
  }
  out << contents;
  if (!out) {
    throw InvalidInput("failed writing " + path);
  }
}

}  // namespace kaleido
