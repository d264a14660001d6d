#include "ibmvs/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "ibmvs/error.hpp"
#include "ibmvs/geometry.hpp"

namespace ibmvs {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] != '#') return tok;
    std::string rest;
    std::getline(in, rest);
  }
  throw FormatError("truncated image header");
}

int header_int(std::istream& in, const char* what) {
  const std::string tok = header_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw FormatError("");
    return v;
  } catch (const std::exception&) {
    throw FormatError(std::string("bad ") + what + " in image header: '" + tok + "'");
  }
}

void expect_end(std::istream& in, const char* what) {
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(std::string(what) + ": trailing bytes after data");
}

}  // namespace

void write_pfm(std::ostream& out, const ScalarMap& map) {
  out << "Pf\n" << map.width() << ' ' << map.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(map.width()));
  for (int y = map.height() - 1; y >= 0; --y) {
    for (int x = 0; x < map.width(); ++x) row[x] = static_cast<float>(map(x, y));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw FormatError("PFM write failed");
}

void write_pfm(const std::string& path, const ScalarMap& map) {
  auto out = open_out(path);
  write_pfm(out, map);
}

ScalarMap read_pfm(std::istream& in) {
  const std::string magic = header_token(in);
  if (magic != "Pf") throw FormatError("PFM: expected single-channel 'Pf' magic, got '" + magic + "'");
  const int w = header_int(in, "width");
  const int h = header_int(in, "height");
  const std::string scale_tok = header_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw FormatError("PFM: bad scale '" + scale_tok + "'");
  }
  if (!(scale < 0.0)) throw FormatError("PFM: only little-endian (negative scale) files are supported");
  in.get();  // single whitespace before data
  ScalarMap map(w, h, 0.0);
  std::vector<float> row(static_cast<std::size_t>(w));
  for (int y = h - 1; y >= 0; --y) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4)))
      throw FormatError("PFM: truncated data");
    for (int x = 0; x < w; ++x) map(x, y) = row[x];
  }
  expect_end(in, "PFM");
  return map;
}

ScalarMap read_pfm(const std::string& path) {
  auto in = open_in(path);
  return read_pfm(in);
}

void write_ibdm(std::ostream& out, const ScalarMap& map) {
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(map.width()),
                                 static_cast<std::uint32_t>(map.height())};
  out.write("IBDM", 4);
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const float v = static_cast<float>(map[i]);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!out) throw FormatError("IBDM write failed");
}

void write_ibdm(const std::string& path, const ScalarMap& map) {
  auto out = open_out(path);
  write_ibdm(out, map);
}

ScalarMap read_ibdm(std::istream& in) {
  char magic[4];
  std::uint32_t dims[2];
  if (!in.read(magic, 4) || std::memcmp(magic, "IBDM", 4) != 0) throw FormatError("IBDM: bad magic");
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw FormatError("IBDM: truncated header");
  if (dims[0] == 0 || dims[1] == 0 || dims[0] > (1u << 16) || dims[1] > (1u << 16))
    throw FormatError("IBDM: implausible dimensions");
  ScalarMap map(static_cast<int>(dims[0]), static_cast<int>(dims[1]), 0.0);
  std::vector<float> buf(map.size());
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4)))
    throw FormatError("IBDM: truncated data");
  for (std::size_t i = 0; i < buf.size(); ++i) map[i] = buf[i];
  expect_end(in, "IBDM");
  return map;
}

ScalarMap read_ibdm(const std::string& path) {
  auto in = open_in(path);
  return read_ibdm(in);
}

void write_pnm(std::ostream& out, const Tensor& image) {
  const int c = image.channels();
  if (c != 1 && c != 3) throw DimensionError("PNM: image must have 1 or 3 channels");
  out << (c == 3 ? "P6\n" : "P5\n") << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * c);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x)
      for (int k = 0; k < c; ++k) {
        const double v = std::clamp(static_cast<double>(image.at(k, y, x)), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * c + k] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw FormatError("PNM write failed");
}

void write_pnm(const std::string& path, const Tensor& image) {
  auto out = open_out(path);
  write_pnm(out, image);
}

Tensor read_pnm(std::istream& in) {
  const std::string magic = header_token(in);
  if (magic != "P5" && magic != "P6") throw FormatError("PNM: unsupported magic '" + magic + "'");
  const int c = magic == "P6" ? 3 : 1;
  const int w = header_int(in, "width");
  const int h = header_int(in, "height");
  if (header_int(in, "maxval") != 255) throw FormatError("PNM: only 8-bit images are supported");
  in.get();
  Tensor image(c, h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * c);
  for (int y = 0; y < h; ++y) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
      throw FormatError("PNM: truncated data");
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k)
        image.at(k, y, x) = static_cast<float>(row[static_cast<std::size_t>(x) * c + k] / 255.0);
  }
  expect_end(in, "PNM");
  return image;
}

Tensor read_pnm(const std::string& path) {
  auto in = open_in(path);
  return read_pnm(in);
}

std::string view_stem(int index) { return fmt::format("{:04d}", index); }

void write_bundle(const std::string& dir, const SceneBundle& bundle) {
  const fs::path root(dir);
  fs::create_directories(root / "images");
  std::vector<Camera> cams;
  bool any_depth = false;
  for (const View& v : bundle.views) {
    cams.push_back(v.camera);
    any_depth = any_depth || v.depth.has_value();
  }
  write_cameras((root / "cameras.txt").string(), cams);
  if (any_depth) fs::create_directories(root / "depths");
  for (int i = 0; i < bundle.size(); ++i) {
    const View& v = bundle.views[i];
    const char* ext = v.image.channels() == 3 ? ".ppm" : ".pgm";
    write_pnm((root / "images" / (view_stem(i) + ext)).string(), v.image);
    if (v.depth) write_pfm((root / "depths" / (view_stem(i) + ".pfm")).string(), *v.depth);
  }
}

SceneBundle read_bundle(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw FormatError("scene directory not found: " + dir);
  const auto cams = read_cameras((root / "cameras.txt").string());
  SceneBundle bundle;
  for (int i = 0; i < static_cast<int>(cams.size()); ++i) {
    View v;
    v.camera = cams[i];
    fs::path img = root / "images" / (view_stem(i) + ".ppm");
    if (!fs::exists(img)) img = root / "images" / (view_stem(i) + ".pgm");
    if (!fs::exists(img)) throw FormatError("missing image for view " + std::to_string(i) + " in " + dir);
    v.image = read_pnm(img.string());
    if (v.image.width() != v.camera.width || v.image.height() != v.camera.height)
      throw DimensionError("image " + img.string() + " does not match its camera size");
    const fs::path depth = root / "depths" / (view_stem(i) + ".pfm");
    if (fs::exists(depth)) {
      v.depth = read_pfm(depth.string());
      if (v.depth->width() != v.camera.width || v.depth->height() != v.camera.height)
        throw DimensionError("depth " + depth.string() + " does not match its camera size");
    }
    bundle.views.push_back(std::move(v));
  }
  return bundle;
}

}  // namespace ibmvs
