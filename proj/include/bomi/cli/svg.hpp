#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace bomi::cli {

struct Polyline {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  double width = 1.5;
};

struct Marker {
  double x = 0;
  double y = 0;
  double radius = 0;  // data units; 0 draws a fixed-size dot
  std::string color = "#d62728";
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Polyline> lines;
  std::vector<Marker> markers;
  /// Drawn in the middle of the axes (e.g. for empty inputs).
  std::string note;
  /// Fixed limits; when lo >= hi the data range is used.
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  bool equal_aspect = false;
};

/// Panels laid out left to right, one row.
class Figure {
 public:
  explicit Figure(std::string title) : title_(std::move(title)) {}
  Panel& AddPanel() { return panels_.emplace_back(); }
  /// Emitted as an XML comment after the root element (provenance).
  void SetComment(std::string c) { comment_ = std::move(c); }
  std::string Render() const;
  void Write(const std::filesystem::path& path) const;

 private:
  std::string title_;
  std::string comment_;
  std::vector<Panel> panels_;
};

}  // namespace bomi::cli
