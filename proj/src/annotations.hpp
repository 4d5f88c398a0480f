#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace boneage {

enum class Cohort { Male, Female, Unknown };

const char* cohort_name(Cohort cohort);
Cohort cohort_from_name(const std::string& name);

struct Vertex {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vertex&) const = default;
};

struct ImageRecord {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  Cohort cohort = Cohort::Unknown;
  std::optional<double> target_age;  // months
  bool operator==(const ImageRecord&) const = default;
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  std::vector<Vertex> polygon;
  bool operator==(const Annotation&) const = default;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
  bool operator==(const Category&) const = default;
};

struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;
  bool operator==(const Dataset&) const = default;
};

/// Parses a COCO instance document. Accepts segmentations either as the
/// standard nested form [[x1,y1,...]] with a single part, or as a flat
/// [x1,y1,...] list. The returned dataset always satisfies the type
/// invariants (unique ids, resolvable references, polygons with at least
/// three in-bounds vertices).
Dataset parse_coco(const std::string& text);

/// Parses a VIA-2 project export. Only polygon region shapes are accepted.
/// VIA files carry no pixel dimensions, so each image's width/height is the
/// smallest integer frame containing its polygons (ceil of the max
/// coordinate); an authored COCO file for the same regions must use the
/// same dimensions for the pair to compare equal.
Dataset parse_via(const std::string& text);

/// Serializes to canonical COCO JSON (sorted keys, LF, trailing newline).
/// Cohort and target age are not part of the COCO schema; they travel in
/// the sidecar CSV below.
std::string to_coco(const Dataset& dataset);

/// Checks every type invariant and referential link; throws on violation.
void validate(const Dataset& dataset);

/// Sidecar CSV ("file_name,cohort,age_months") since neither annotation
/// format carries cohort or age. Rows for unknown file names are ignored.
void apply_sidecar(Dataset& dataset, const std::string& csv_text);
std::string to_sidecar(const Dataset& dataset);

}  // namespace boneage
