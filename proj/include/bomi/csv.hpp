#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bomi/types.hpp"

namespace bomi::csv {

struct Table {
  std::vector<std::string> header;  // empty when the file has no header row
  std::vector<std::vector<double>> rows;
};

/// Reads a numeric CSV. Lines starting with '#' are skipped; a first row that
/// does not parse as numbers is taken as the header. Ragged rows throw
/// SchemaVersionMismatch.
Table Read(const std::filesystem::path& path);

/// Round-trip exact formatting (shortest representation that parses back to
/// the same double).
std::string FormatDouble(double v);

void WriteRow(std::ostream& os, const std::vector<double>& row);

/// Opens `path` for writing, creating parent directories; throws IoError.
std::ofstream OpenForWrite(const std::filesystem::path& path);

std::string ReadText(const std::filesystem::path& path);

}  // namespace bomi::csv
