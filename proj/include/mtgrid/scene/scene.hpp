#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtgrid/tokenizer/token_grid.hpp"

namespace mtgrid::scene {

enum class Shape : std::uint8_t { square, circle, triangle, cross, ring, bar };
inline constexpr int kNumShapes = 6;
inline constexpr std::array<Shape, kNumShapes> kAllShapes = {
    Shape::square, Shape::circle, Shape::triangle,
    Shape::cross,  Shape::ring,   Shape::bar};

// Palette layout: 0 background, 1..7 object colors, 8..15 reserved.
inline constexpr PaletteIndex kBackground = 0;
inline constexpr int kNumObjectColors = 7;
inline constexpr PaletteIndex kFirstObjectColor = 1;
inline constexpr PaletteIndex kLastObjectColor = 7;

inline constexpr int kMaxObjects = 4;
inline constexpr int kMinObjectSize = 4;
inline constexpr int kMaxObjectSize = 6;

enum class Relation : std::uint8_t { left_of, right_of, above, below };

std::string_view shape_name(Shape shape);
std::optional<Shape> parse_shape(std::string_view name);
// English color name for an object color index ("red", ...).
std::string_view color_name(PaletteIndex color);
std::optional<PaletteIndex> parse_color(std::string_view name);
std::string_view relation_name(Relation relation);
std::optional<Relation> parse_relation(std::string_view name);

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct SceneObject {
  Shape shape = Shape::square;
  PaletteIndex color = kFirstObjectColor;
  Cell anchor;  // top-left corner of the bounding box
  int size = kMinObjectSize;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  int grid_size = kGridSide;
  PaletteIndex background_color = kBackground;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

// Bounding box extent of a shape at a given size.
struct Extent {
  int rows = 0;
  int cols = 0;
};

Extent shape_extent(Shape shape, int size);

// Cells covered by the shape, relative to its bounding-box origin, in
// row-major order. Throws InvalidArgument for sizes outside
// [kMinObjectSize, kMaxObjectSize].
std::vector<Cell> shape_mask(Shape shape, int size);

struct Centroid {
  double row = 0.0;
  double col = 0.0;
};

Centroid object_centroid(const SceneObject& object);

// Relation of centroid a with respect to centroid b along the axis of larger
// separation. Empty when both axis separations are under one cell.
std::optional<Relation> relation_between(const Centroid& a, const Centroid& b);

// Throws InvalidArgument when an invariant of SceneSpec is violated:
// object count in [0, kMaxObjects], colors distinct from the background,
// shapes inside the grid, and at least one free cell between bounding boxes.
void validate_scene(const SceneSpec& scene);

struct ObjectConstraint {
  std::optional<Shape> shape;
  std::optional<PaletteIndex> color;
};

// Targets for sample_scene. Every populated field is satisfied exactly.
struct SceneConstraints {
  std::optional<int> count;
  // Targets for the first objects.size() objects, in order.
  std::vector<ObjectConstraint> objects;
  // All objects share one shape and one color (counting scenes).
  bool identical = false;
  // Relation of object 0 with respect to object 1.
  std::optional<Relation> relation;
};

SceneSpec sample_scene(std::uint64_t rng_seed,
                       const SceneConstraints& constraints = {});

TokenGrid render_scene(const SceneSpec& scene);

// Objects grouped by (shape, color) in order of first appearance.
struct ObjectGroup {
  Shape shape;
  PaletteIndex color;
  int count = 0;
  std::vector<std::size_t> members;
};

std::vector<ObjectGroup> group_objects(const SceneSpec& scene);

}  // namespace mtgrid::scene
