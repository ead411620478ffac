// Copyright (c) 2026 The pcseg authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pcseg/ply_io.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary PLY support assumes a little-endian host");

namespace pcseg {

namespace {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::I8:
    case Scalar::U8:
      return 1;
    case Scalar::I16:
    case Scalar::U16:
      return 2;
    case Scalar::I32:
    case Scalar::U32:
    case Scalar::F32:
      return 4;
    case Scalar::F64:
      return 8;
  }
  return 0;
}

bool parse_scalar_type(const std::string& word, Scalar& out) {
  if (word == "char" || word == "int8") out = Scalar::I8;
  else if (word == "uchar" || word == "uint8") out = Scalar::U8;
  else if (word == "short" || word == "int16") out = Scalar::I16;
  else if (word == "ushort" || word == "uint16") out = Scalar::U16;
  else if (word == "int" || word == "int32") out = Scalar::I32;
  else if (word == "uint" || word == "uint32") out = Scalar::U32;
  else if (word == "float" || word == "float32") out = Scalar::F32;
  else if (word == "double" || word == "float64") out = Scalar::F64;
  else return false;
  return true;
}

struct Property {
  std::string name;
  Scalar type = Scalar::F64;
  bool is_list = false;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;

  bool has_list() const {
    for (const Property& p : properties) {
      if (p.is_list) return true;
    }
    return false;
  }

  std::size_t row_size() const {
    std::size_t n = 0;
    for (const Property& p : properties) n += scalar_size(p.type);
    return n;
  }
};

[[noreturn]] void fail_at(std::size_t offset, const std::string& what) {
  throw IoError(what + " at byte " + std::to_string(offset));
}

std::string file_to_string(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Reads the next header line; `pos` is left one past the newline.
std::string next_line(const std::string& data, std::size_t& pos) {
  if (pos >= data.size()) fail_at(pos, "unexpected end of file inside header");
  std::size_t eol = data.find('\n', pos);
  if (eol == std::string::npos) fail_at(pos, "header line without newline");
  std::string line = data.substr(pos, eol - pos);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  pos = eol + 1;
  return line;
}

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream ss(line);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

double read_binary_scalar(const std::string& data, std::size_t& pos, Scalar type) {
  std::size_t n = scalar_size(type);
  if (pos + n > data.size()) fail_at(pos, "binary payload truncated");
  const char* src = data.data() + pos;
  double value = 0.0;
  switch (type) {
    case Scalar::I8: {
      std::int8_t v;
      std::memcpy(&v, src, 1);
      value = v;
      break;
    }
    case Scalar::U8: {
      std::uint8_t v;
      std::memcpy(&v, src, 1);
      value = v;
      break;
    }
    case Scalar::I16: {
      std::int16_t v;
      std::memcpy(&v, src, 2);
      value = v;
      break;
    }
    case Scalar::U16: {
      std::uint16_t v;
      std::memcpy(&v, src, 2);
      value = v;
      break;
    }
    case Scalar::I32: {
      std::int32_t v;
      std::memcpy(&v, src, 4);
      value = v;
      break;
    }
    case Scalar::U32: {
      std::uint32_t v;
      std::memcpy(&v, src, 4);
      value = v;
      break;
    }
    case Scalar::F32: {
      float v;
      std::memcpy(&v, src, 4);
      value = v;
      break;
    }
    case Scalar::F64: {
      std::memcpy(&value, src, 8);
      break;
    }
  }
  pos += n;
  return value;
}

double read_ascii_scalar(const std::string& data, std::size_t& pos) {
  while (pos < data.size() && (data[pos] == ' ' || data[pos] == '\t' ||
                               data[pos] == '\r' || data[pos] == '\n')) {
    ++pos;
  }
  if (pos >= data.size()) fail_at(pos, "ASCII payload truncated");
  errno = 0;
  char* end = nullptr;
  double value = std::strtod(data.c_str() + pos, &end);
  if (end == data.c_str() + pos) fail_at(pos, "expected a number");
  if (errno == ERANGE) fail_at(pos, "number out of range");
  pos = static_cast<std::size_t>(end - data.c_str());
  return value;
}

struct VertexLayout {
  int x = -1, y = -1, z = -1;
  int nx = -1, ny = -1, nz = -1;
  int red = -1, green = -1, blue = -1;
};

VertexLayout resolve_layout(const Element& vertex, std::size_t header_end) {
  VertexLayout lay;
  for (int i = 0; i < static_cast<int>(vertex.properties.size()); ++i) {
    const Property& p = vertex.properties[i];
    if (p.is_list) fail_at(header_end, "list property '" + p.name + "' in vertex element is unsupported");
    if (p.name == "x") lay.x = i;
    else if (p.name == "y") lay.y = i;
    else if (p.name == "z") lay.z = i;
    else if (p.name == "nx") lay.nx = i;
    else if (p.name == "ny") lay.ny = i;
    else if (p.name == "nz") lay.nz = i;
    else if (p.name == "red") lay.red = i;
    else if (p.name == "green") lay.green = i;
    else if (p.name == "blue") lay.blue = i;
  }
  if (lay.x < 0 || lay.y < 0 || lay.z < 0) {
    fail_at(header_end, "vertex element lacks x/y/z properties");
  }
  int n_normals = (lay.nx >= 0) + (lay.ny >= 0) + (lay.nz >= 0);
  if (n_normals != 0 && n_normals != 3) fail_at(header_end, "incomplete nx/ny/nz triple");
  int n_colors = (lay.red >= 0) + (lay.green >= 0) + (lay.blue >= 0);
  if (n_colors != 0 && n_colors != 3) fail_at(header_end, "incomplete red/green/blue triple");
  if (n_colors == 3) {
    for (int idx : {lay.red, lay.green, lay.blue}) {
      Scalar t = vertex.properties[static_cast<std::size_t>(idx)].type;
      if (t != Scalar::U8 && t != Scalar::F32 && t != Scalar::F64) {
        fail_at(header_end, "unsupported color property type");
      }
    }
  }
  return lay;
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

PointCloud read_ply(const std::string& path) {
  const std::string data = file_to_string(path);
  std::size_t pos = 0;

  if (next_line(data, pos) != "ply") fail_at(0, "missing 'ply' magic line");
  bool binary = false;
  {
    std::size_t line_start = pos;
    std::string fmt = next_line(data, pos);
    if (fmt == "format ascii 1.0") binary = false;
    else if (fmt == "format binary_little_endian 1.0") binary = true;
    else fail_at(line_start, "unsupported format line '" + fmt + "'");
  }

  std::vector<Element> elements;
  std::vector<std::string> class_names;
  for (;;) {
    std::size_t line_start = pos;
    std::string line = next_line(data, pos);
    std::vector<std::string> words = split_words(line);
    if (words.empty()) continue;
    if (words[0] == "end_header") break;
    if (words[0] == "comment" || words[0] == "obj_info") {
      if (words.size() >= 3 && words[1] == "class") {
        std::string name = words[2];
        for (std::size_t i = 3; i < words.size(); ++i) name += " " + words[i];
        class_names.push_back(name);
      }
      continue;
    }
    if (words[0] == "element") {
      if (words.size() != 3) fail_at(line_start, "malformed element line");
      Element e;
      e.name = words[1];
      errno = 0;
      char* end = nullptr;
      long long count = std::strtoll(words[2].c_str(), &end, 10);
      if (*end != '\0' || errno == ERANGE || count < 0) {
        fail_at(line_start, "bad element count '" + words[2] + "'");
      }
      e.count = static_cast<std::size_t>(count);
      elements.push_back(e);
      continue;
    }
    if (words[0] == "property") {
      if (elements.empty()) fail_at(line_start, "property before any element");
      Property p;
      if (words.size() == 5 && words[1] == "list") {
        p.is_list = true;
        p.name = words[4];
      } else if (words.size() == 3) {
        if (!parse_scalar_type(words[1], p.type)) {
          fail_at(line_start, "unknown property type '" + words[1] + "'");
        }
        p.name = words[2];
      } else {
        fail_at(line_start, "malformed property line");
      }
      elements.back().properties.push_back(p);
      continue;
    }
    fail_at(line_start, "unknown header keyword '" + words[0] + "'");
  }
  const std::size_t header_end = pos;

  std::size_t vertex_index = elements.size();
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (elements[i].name == "vertex") {
      vertex_index = i;
      break;
    }
  }
  if (vertex_index == elements.size()) fail_at(header_end, "no vertex element");
  const Element& vertex = elements[vertex_index];
  const VertexLayout lay = resolve_layout(vertex, header_end);

  // Skip any elements stored ahead of the vertices.
  for (std::size_t i = 0; i < vertex_index; ++i) {
    const Element& e = elements[i];
    if (binary) {
      if (e.has_list()) fail_at(pos, "cannot skip binary element '" + e.name + "' with list properties");
      std::size_t bytes = e.count * e.row_size();
      if (pos + bytes > data.size()) fail_at(pos, "binary payload truncated");
      pos += bytes;
    } else {
      for (std::size_t r = 0; r < e.count; ++r) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) fail_at(pos, "ASCII payload truncated");
        pos = eol + 1;
      }
    }
  }

  PointCloud cloud;
  cloud.class_names = class_names;
  cloud.points.resize(vertex.count);
  std::vector<double> row(vertex.properties.size(), 0.0);
  const bool has_normals = lay.nx >= 0;
  const bool has_colors = lay.red >= 0;
  const bool color_is_byte =
      has_colors && vertex.properties[static_cast<std::size_t>(lay.red)].type == Scalar::U8;

  for (std::size_t r = 0; r < vertex.count; ++r) {
    const std::size_t row_start = pos;
    for (std::size_t c = 0; c < vertex.properties.size(); ++c) {
      row[c] = binary ? read_binary_scalar(data, pos, vertex.properties[c].type)
                      : read_ascii_scalar(data, pos);
    }
    Vertex& v = cloud.points[r];
    v.location = Eigen::Vector3d(row[static_cast<std::size_t>(lay.x)],
                                 row[static_cast<std::size_t>(lay.y)],
                                 row[static_cast<std::size_t>(lay.z)]);
    if (!v.location.allFinite()) fail_at(row_start, "non-finite vertex location");
    if (has_normals) {
      Eigen::Vector3d n(row[static_cast<std::size_t>(lay.nx)],
                        row[static_cast<std::size_t>(lay.ny)],
                        row[static_cast<std::size_t>(lay.nz)]);
      if (!n.allFinite()) fail_at(row_start, "non-finite vertex normal");
      double len = n.norm();
      if (len < 1e-12) fail_at(row_start, "zero-length vertex normal");
      if (std::abs(len - 1.0) > 1e-9) n /= len;
      v.normal = n;
    }
    if (has_colors) {
      Eigen::Vector3d c(row[static_cast<std::size_t>(lay.red)],
                        row[static_cast<std::size_t>(lay.green)],
                        row[static_cast<std::size_t>(lay.blue)]);
      if (!c.allFinite()) fail_at(row_start, "non-finite vertex color");
      if (color_is_byte) c /= 255.0;
      v.color = Eigen::Vector3d(clamp01(c.x()), clamp01(c.y()), clamp01(c.z()));
    }
  }
  return cloud;
}

void write_ply(const std::string& path, const PointCloud& cloud, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const bool normals = cloud.has_normals();

  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  for (const std::string& name : cloud.class_names) {
    out << "comment class " << name << "\n";
  }
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "property double red\nproperty double green\nproperty double blue\n";
  out << "end_header\n";

  std::vector<double> row;
  row.reserve(9);
  char buf[32];
  for (const Vertex& v : cloud.points) {
    row.clear();
    row.insert(row.end(), {v.location.x(), v.location.y(), v.location.z()});
    if (normals) row.insert(row.end(), {v.normal->x(), v.normal->y(), v.normal->z()});
    row.insert(row.end(), {v.color.x(), v.color.y(), v.color.z()});
    if (binary) {
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    } else {
      for (std::size_t i = 0; i < row.size(); ++i) {
        // %.17g prints enough digits that strtod recovers the exact double.
        std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
        out << (i == 0 ? "" : " ") << buf;
      }
      out << "\n";
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

LabelFile read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  LabelFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    long sem = 0, inst = 0;
    if (!(ss >> sem >> inst)) {
      std::string tok;
      std::istringstream probe(line);
      if (!(probe >> tok)) continue;  // blank line
      throw IoError("line " + std::to_string(line_no) + ": expected two integers");
    }
    std::string extra;
    if (ss >> extra) {
      throw IoError("line " + std::to_string(line_no) + ": trailing token '" + extra + "'");
    }
    out.semantic.push_back(static_cast<int>(sem));
    out.instance.push_back(static_cast<int>(inst));
  }
  return out;
}

void write_labels(const std::string& path, const std::vector<int>& semantic,
                  const std::vector<int>& instance) {
  if (semantic.size() != instance.size()) {
    throw IoError("semantic/instance label count mismatch");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < semantic.size(); ++i) {
    out << semantic[i] << " " << instance[i] << "\n";
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

void apply_labels(PointCloud& cloud, const LabelFile& labels) {
  if (labels.semantic.size() != cloud.size()) {
    throw IoError("label file has " + std::to_string(labels.semantic.size()) +
                  " rows but cloud has " + std::to_string(cloud.size()) + " points");
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    int sem = labels.semantic[i];
    int inst = labels.instance[i];
    if (sem < 0 || sem >= static_cast<int>(cloud.class_names.size())) {
      throw IoError("row " + std::to_string(i + 1) + ": semantic index " +
                    std::to_string(sem) + " outside class table");
    }
    if (inst < 0) {
      throw IoError("row " + std::to_string(i + 1) + ": negative instance id");
    }
    cloud.points[i].gt_semantic = sem;
    cloud.points[i].gt_instance = inst;
  }
}

}  // namespace pcseg
