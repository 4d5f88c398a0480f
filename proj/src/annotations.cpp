#include "annotations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace boneage {

using nlohmann::json;

const char* cohort_name(Cohort cohort) {
  switch (cohort) {
    case Cohort::Male: return "male";
    case Cohort::Female: return "female";
    case Cohort::Unknown: return "unknown";
  }
  return "unknown";
}

Cohort cohort_from_name(const std::string& name) {
  if (name == "male") return Cohort::Male;
  if (name == "female") return Cohort::Female;
  if (name == "unknown" || name.empty()) return Cohort::Unknown;
  fail(ErrorKind::Parse, "unknown cohort label: " + name);
}

namespace {

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, "malformed JSON at byte " + std::to_string(e.byte) +
                               ": " + e.what());
  }
}

const json& require_key(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    fail(ErrorKind::Parse, std::string("missing mandatory key \"") + key +
                               "\"");
  }
  return obj.at(key);
}

double require_number(const json& value, const char* what) {
  if (!value.is_number()) {
    fail(ErrorKind::Parse, std::string(what) + " is not a number");
  }
  return value.get<double>();
}

std::int64_t require_int(const json& value, const char* what) {
  if (!value.is_number_integer()) {
    fail(ErrorKind::Parse, std::string(what) + " is not an integer");
  }
  return value.get<std::int64_t>();
}

std::string require_string(const json& value, const char* what) {
  if (!value.is_string()) {
    fail(ErrorKind::Parse, std::string(what) + " is not a string");
  }
  return value.get<std::string>();
}

std::vector<Vertex> polygon_from_flat(const json& flat,
                                      std::int64_t annotation_id) {
  if (!flat.is_array()) {
    fail(ErrorKind::Parse, "segmentation of annotation " +
                               std::to_string(annotation_id) +
                               " is not an array");
  }
  if (flat.size() < 6 || flat.size() % 2 != 0) {
    fail(ErrorKind::Geometry,
         "segmentation of annotation " + std::to_string(annotation_id) +
             " must list at least 3 (x,y) pairs, got " +
             std::to_string(flat.size()) + " numbers");
  }
  std::vector<Vertex> polygon;
  polygon.reserve(flat.size() / 2);
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    polygon.push_back({require_number(flat[i], "segmentation coordinate"),
                       require_number(flat[i + 1], "segmentation coordinate")});
  }
  return polygon;
}

}  // namespace

void validate(const Dataset& dataset) {
  std::map<std::int64_t, const ImageRecord*> images_by_id;
  for (const auto& image : dataset.images) {
    if (!images_by_id.emplace(image.id, &image).second) {
      fail(ErrorKind::Referential,
           "duplicate image id " + std::to_string(image.id));
    }
    if (image.width <= 0 || image.height <= 0) {
      fail(ErrorKind::Geometry, "image " + std::to_string(image.id) +
                                    " has non-positive dimensions");
    }
    if (image.target_age &&
        (*image.target_age < 0.0 || *image.target_age > 300.0)) {
      fail(ErrorKind::Domain, "image " + std::to_string(image.id) +
                                  " target age out of range [0,300]");
    }
  }
  std::set<std::int64_t> category_ids;
  for (const auto& category : dataset.categories) {
    if (!category_ids.insert(category.id).second) {
      fail(ErrorKind::Referential,
           "duplicate category id " + std::to_string(category.id));
    }
  }
  std::set<std::int64_t> annotation_ids;
  for (const auto& annotation : dataset.annotations) {
    if (!annotation_ids.insert(annotation.id).second) {
      fail(ErrorKind::Referential,
           "duplicate annotation id " + std::to_string(annotation.id));
    }
    auto image_it = images_by_id.find(annotation.image_id);
    if (image_it == images_by_id.end()) {
      fail(ErrorKind::Referential,
           "annotation " + std::to_string(annotation.id) +
               " references missing image id " +
               std::to_string(annotation.image_id));
    }
    if (!category_ids.count(annotation.category_id)) {
      fail(ErrorKind::Referential,
           "annotation " + std::to_string(annotation.id) +
               " references missing category id " +
               std::to_string(annotation.category_id));
    }
    if (annotation.polygon.size() < 3) {
      fail(ErrorKind::Geometry, "annotation " + std::to_string(annotation.id) +
                                    " has fewer than 3 vertices");
    }
    const ImageRecord& image = *image_it->second;
    for (const Vertex& v : annotation.polygon) {
      if (!(v.x >= 0.0 && v.x <= image.width && v.y >= 0.0 &&
            v.y <= image.height) ||
          !std::isfinite(v.x) || !std::isfinite(v.y)) {
        fail(ErrorKind::Geometry,
             "annotation " + std::to_string(annotation.id) +
                 " has a vertex outside image " + std::to_string(image.id));
      }
    }
  }
}

namespace {

Dataset parse_coco_impl(const std::string& text) {
  json doc = parse_json(text);
  if (!doc.is_object()) {
    fail(ErrorKind::Parse, "top-level COCO value is not an object");
  }
  Dataset dataset;

  for (const json& item : require_key(doc, "images")) {
    ImageRecord image;
    image.id = require_int(require_key(item, "id"), "image id");
    image.file_name =
        require_string(require_key(item, "file_name"), "file_name");
    image.width =
        static_cast<int>(require_int(require_key(item, "width"), "width"));
    image.height =
        static_cast<int>(require_int(require_key(item, "height"), "height"));
    dataset.images.push_back(std::move(image));
  }

  for (const json& item : require_key(doc, "categories")) {
    Category category;
    category.id = require_int(require_key(item, "id"), "category id");
    category.name = require_string(require_key(item, "name"), "category name");
    dataset.categories.push_back(std::move(category));
  }

  for (const json& item : require_key(doc, "annotations")) {
    Annotation annotation;
    annotation.id = require_int(require_key(item, "id"), "annotation id");
    annotation.image_id =
        require_int(require_key(item, "image_id"), "image_id");
    annotation.category_id =
        require_int(require_key(item, "category_id"), "category_id");
    const json& seg = require_key(item, "segmentation");
    if (!seg.is_array()) {
      fail(ErrorKind::UnsupportedShape,
           "annotation " + std::to_string(annotation.id) +
               " segmentation is not a polygon list (RLE is unsupported)");
    }
    if (!seg.empty() && seg[0].is_array()) {
      if (seg.size() != 1) {
        fail(ErrorKind::UnsupportedShape,
             "annotation " + std::to_string(annotation.id) +
                 " has a multi-part segmentation; one polygon per annotation");
      }
      annotation.polygon = polygon_from_flat(seg[0], annotation.id);
    } else {
      annotation.polygon = polygon_from_flat(seg, annotation.id);
    }
    dataset.annotations.push_back(std::move(annotation));
  }

  validate(dataset);
  return dataset;
}

Dataset parse_via_impl(const std::string& text) {
  json doc = parse_json(text);
  if (!doc.is_object()) {
    fail(ErrorKind::Parse, "top-level VIA value is not an object");
  }
  // VIA-2 saves either a full project with _via_img_metadata or a bare
  // {key: entry} export. nlohmann objects are key-ordered, which makes the
  // assigned ids deterministic.
  const json* metadata = &doc;
  if (doc.contains("_via_img_metadata")) {
    metadata = &doc.at("_via_img_metadata");
  }
  if (!metadata->is_object()) {
    fail(ErrorKind::Parse, "_via_img_metadata is not an object");
  }

  Dataset dataset;
  std::map<std::string, std::int64_t> category_ids;
  std::int64_t next_annotation_id = 1;

  for (const auto& [key, entry] : metadata->items()) {
    if (!entry.is_object() || !entry.contains("filename")) {
      fail(ErrorKind::Parse, "VIA entry \"" + key + "\" has no filename");
    }
    ImageRecord image;
    image.id = static_cast<std::int64_t>(dataset.images.size()) + 1;
    image.file_name = require_string(entry.at("filename"), "filename");

    double max_x = 0.0;
    double max_y = 0.0;
    std::vector<Annotation> pending;
    if (entry.contains("regions")) {
      const json& regions = entry.at("regions");
      if (!regions.is_array()) {
        fail(ErrorKind::Parse, "VIA regions is not an array");
      }
      for (const json& region : regions) {
        const json& shape = require_key(region, "shape_attributes");
        std::string shape_name =
            require_string(require_key(shape, "name"), "shape name");
        if (shape_name != "polygon") {
          fail(ErrorKind::UnsupportedShape,
               "region shape \"" + shape_name +
                   "\" is not supported; only polygons are");
        }
        const json& xs = require_key(shape, "all_points_x");
        const json& ys = require_key(shape, "all_points_y");
        if (!xs.is_array() || !ys.is_array()) {
          fail(ErrorKind::Parse, "all_points_x/all_points_y are not arrays");
        }
        if (xs.size() != ys.size()) {
          fail(ErrorKind::Geometry,
               "all_points_x has " + std::to_string(xs.size()) +
                   " entries but all_points_y has " +
                   std::to_string(ys.size()));
        }
        if (xs.size() < 3) {
          fail(ErrorKind::Geometry,
               "polygon region has fewer than 3 vertices");
        }
        Annotation annotation;
        annotation.id = next_annotation_id++;
        annotation.image_id = image.id;
        std::string category = "hand";
        if (region.contains("region_attributes")) {
          const json& attrs = region.at("region_attributes");
          if (attrs.is_object() && attrs.contains("category") &&
              attrs.at("category").is_string()) {
            category = attrs.at("category").get<std::string>();
          }
        }
        auto [it, inserted] = category_ids.try_emplace(
            category, static_cast<std::int64_t>(category_ids.size()) + 1);
        annotation.category_id = it->second;
        if (inserted) {
          dataset.categories.push_back({annotation.category_id, category});
        }
        for (std::size_t i = 0; i < xs.size(); ++i) {
          double x = require_number(xs[i], "all_points_x entry");
          double y = require_number(ys[i], "all_points_y entry");
          annotation.polygon.push_back({x, y});
          max_x = std::max(max_x, x);
          max_y = std::max(max_y, y);
        }
        pending.push_back(std::move(annotation));
      }
    }

    image.width = std::max(1, static_cast<int>(std::ceil(max_x)));
    image.height = std::max(1, static_cast<int>(std::ceil(max_y)));
    dataset.images.push_back(std::move(image));
    for (auto& annotation : pending) {
      dataset.annotations.push_back(std::move(annotation));
    }
  }

  validate(dataset);
  return dataset;
}

}  // namespace

// Any stray library exception (unexpected type coercions and the like)
// surfaces as a typed ParseError so parsing is total over arbitrary input.
Dataset parse_coco(const std::string& text) {
  try {
    return parse_coco_impl(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("COCO document error: ") + e.what());
  }
}

Dataset parse_via(const std::string& text) {
  try {
    return parse_via_impl(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("VIA document error: ") + e.what());
  }
}

std::string to_coco(const Dataset& dataset) {
  json images = json::array();
  for (const auto& image : dataset.images) {
    images.push_back({{"id", image.id},
                      {"file_name", image.file_name},
                      {"width", image.width},
                      {"height", image.height}});
  }
  json annotations = json::array();
  for (const auto& annotation : dataset.annotations) {
    json flat = json::array();
    for (const Vertex& v : annotation.polygon) {
      flat.push_back(v.x);
      flat.push_back(v.y);
    }
    annotations.push_back({{"id", annotation.id},
                           {"image_id", annotation.image_id},
                           {"category_id", annotation.category_id},
                           {"segmentation", json::array({flat})}});
  }
  json categories = json::array();
  for (const auto& category : dataset.categories) {
    categories.push_back({{"id", category.id}, {"name", category.name}});
  }
  json doc = {{"images", images},
              {"annotations", annotations},
              {"categories", categories}};
  return doc.dump(2) + "\n";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

void apply_sidecar(Dataset& dataset, const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) {
    fail(ErrorKind::Parse, "sidecar CSV is empty");
  }
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "file_name" ||
      header[1] != "cohort" || header[2] != "age_months") {
    fail(ErrorKind::Parse,
         "sidecar CSV header must be file_name,cohort,age_months");
  }
  std::map<std::string, ImageRecord*> by_name;
  for (auto& image : dataset.images) {
    by_name[image.file_name] = &image;
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() < 3) {
      fail(ErrorKind::Parse,
           "sidecar CSV line " + std::to_string(line_no) + " has " +
               std::to_string(fields.size()) + " fields, expected 3");
    }
    auto it = by_name.find(fields[0]);
    if (it == by_name.end()) {
      continue;  // rows for files not in the dataset are ignored
    }
    it->second->cohort = cohort_from_name(fields[1]);
    if (!fields[2].empty()) {
      double age = 0.0;
      try {
        std::size_t used = 0;
        age = std::stod(fields[2], &used);
        if (used != fields[2].size()) {
          throw std::invalid_argument(fields[2]);
        }
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, "sidecar CSV line " + std::to_string(line_no) +
                                   ": bad age_months value");
      }
      if (age < 0.0 || age > 300.0) {
        fail(ErrorKind::Domain, "sidecar CSV line " + std::to_string(line_no) +
                                    ": age out of range [0,300]");
      }
      it->second->target_age = age;
    }
  }
}

std::string to_sidecar(const Dataset& dataset) {
  std::string out = "file_name,cohort,age_months\n";
  for (const auto& image : dataset.images) {
    out += image.file_name;
    out += ',';
    out += cohort_name(image.cohort);
    out += ',';
    if (image.target_age) {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof(buf), *image.target_age);
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

}  // namespace boneage
