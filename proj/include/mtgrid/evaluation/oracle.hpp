#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mtgrid/scene/scene.hpp"

namespace mtgrid::eval {

struct DetectedObject {
  std::optional<scene::Shape> shape;  // empty: no template matched ("unknown")
  PaletteIndex color = 0;
  scene::Centroid centroid;
  int cell_count = 0;
  int row0 = 0, col0 = 0, rows = 0, cols = 0;  // bounding box
};

inline constexpr int kMinComponentCells = 3;
// A component matches a shape template of the same bounding box when the two
// cell sets differ in at most this many cells. Distinct templates of one
// extent differ in at least four cells, so a match is unambiguous.
inline constexpr int kShapeTolerance = 1;

// 4-connected components of equal non-background color, in row-major order
// of their first cell. Components under three cells are dropped.
std::vector<DetectedObject> detect_objects(const TokenGrid& grid);

// Template that matches a component's cells, or empty.
std::optional<scene::Shape> classify_shape(const std::vector<scene::Cell>& cells);

enum class Dimension { single_object, two_objects, counting, colors, position, color_attribute };
inline constexpr int kNumDimensions = 6;
inline constexpr std::array<Dimension, kNumDimensions> kAllDimensions = {
    Dimension::single_object, Dimension::two_objects, Dimension::counting,
    Dimension::colors,        Dimension::position,    Dimension::color_attribute};

std::string_view dimension_name(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view name);

struct TargetObject {
  scene::Shape shape = scene::Shape::square;
  PaletteIndex color = scene::kFirstObjectColor;
  int count = 1;
  friend bool operator==(const TargetObject&, const TargetObject&) = default;
};

// What a prompt asks for. Relation, when present, is of objects[0] with
// respect to objects[1].
struct EvalConstraint {
  Dimension dimension = Dimension::single_object;
  std::vector<TargetObject> objects;
  std::optional<scene::Relation> relation;
  friend bool operator==(const EvalConstraint&, const EvalConstraint&) = default;
};

// Throws InvalidArgument when the constraint does not fit its dimension or
// names a color outside the object palette.
void validate_constraint(const EvalConstraint& constraint);

nlohmann::json constraint_to_json(const EvalConstraint& constraint);
// Throws InvalidArgument naming an unknown shape, color, relation or dimension.
EvalConstraint constraint_from_json(const nlohmann::json& j);

// Per-dimension predicates on a detection list:
//   single_object    exactly one detection with the named shape and color
//   two_objects      every named shape is detected
//   counting         detections with the named shape and color number `count`
//   colors           the named shape is detected and every such detection has the color
//   position         both objects detected and, for some pair, the centroids
//                    differ by at least one cell in the named direction
//   color_attribute  every named (shape, color) pair is detected
struct PromptScore {
  std::array<std::optional<bool>, kNumDimensions> flags{};  // set for evaluated dimensions
  bool passed() const;
};

bool check_dimension(Dimension d, const EvalConstraint& c, const std::vector<DetectedObject>& found);

// Evaluates the constraint's own dimension plus every other dimension the
// constraint instantiates (for example a position prompt also names two
// objects and their colors).
PromptScore score_prompt(const EvalConstraint& constraint, const TokenGrid& grid);

// Dead-zone relation test between centroids: a is `relation` of b when the
// coordinate difference on that axis is at least one cell.
bool relation_holds(scene::Relation relation, const scene::Centroid& a, const scene::Centroid& b);

}  // namespace mtgrid::eval
