#pragma once

#include "kaleido/baselines.hpp"
#include "kaleido/calibration.hpp"
#include "kaleido/chamber.hpp"
#include "kaleido/experiments.hpp"
#include "kaleido/scenarios.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kaleido {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Scene configuration file: camera, mirrors, max_order, seed, sigma, plus optional
/// scenario metadata (name, nominal_point, half_extent) and explicit points.
struct SceneFile {
  Scenario scenario;
  std::vector<Point3> points;
  bool has_sampling_box = false;
};

Json scene_to_json(const Scenario& scenario, const std::vector<Point3>& points = {});
/// Throws InvalidInput on malformed documents or an unsupported schema_version.
SceneFile scene_from_json(const Json& doc);

Json mirrors_to_json(const std::vector<Mirror>& mirrors);
std::vector<Mirror> mirrors_from_json(const Json& doc);

/// Header "id,u,v"; ids are the row order.
std::string candidates_to_csv(const std::vector<Pixel2>& candidates);
std::vector<Pixel2> candidates_from_csv(std::string_view text);

/// Labeled projections; `candidate_ids[k]`, when present, records the candidate row
/// observation k was written to.
Json observations_to_json(const std::vector<LabeledProjection>& observations,
                          std::size_t num_mirrors,
                          const std::vector<std::optional<std::size_t>>& candidate_ids = {});
/// Also accepts {"landmarks": [{"id", "observations": [{"label", "u", "v"}]}]}.
std::vector<LabeledProjection> observations_from_json(const Json& doc, std::size_t num_mirrors);

Json pruning_to_json(const PruningCounts& counts);
Json assignment_to_json(const AssignmentResult& result, const std::vector<Pixel2>& candidates,
                        std::size_t num_mirrors);
std::string assignment_to_csv(const AssignmentResult& result, const std::vector<Pixel2>& candidates,
                              std::size_t num_mirrors);

Json estimate_to_json(const CalibrationEstimate& estimate);
CalibrationEstimate estimate_from_json(const Json& doc);

Json reference_to_json(const ReferenceObject& reference, std::size_t num_mirrors);
ReferenceObject reference_from_json(const Json& doc, std::size_t num_mirrors);

Json trial_to_json(const TrialRecord& trial);
Json sweep_to_json(const SweepReport& report);

Json prune_stats_to_json(const std::string& scenario, const std::vector<PruneTrial>& trials);
std::string prune_stats_to_csv(const std::vector<PruneTrial>& trials);

/// Parses JSON text, mapping syntax errors to InvalidInput.
Json parse_json(std::string_view text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace kaleido
