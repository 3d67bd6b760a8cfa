#include "refdepth/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "refdepth/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

namespace refdepth {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

// Reads one whitespace-delimited token, skipping comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw IoError("unexpected end of header");
}

}  // namespace

void write_pfm(const std::string& path, const DepthMap& map) {
  auto f = open_out(path);
  f << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
  std::vector<float> row(map.width);
  for (int y = map.height - 1; y >= 0; --y) {  // bottom-to-top
    for (int x = 0; x < map.width; ++x)
      row[x] = map.valid[map.idx(x, y)] ? map.values[map.idx(x, y)] : -1.0f;
    f.write(reinterpret_cast<const char*>(row.data()), map.width * sizeof(float));
  }
  if (!f) throw IoError("write failed: " + path);
}

DepthMap read_pfm(const std::string& path) {
  auto f = open_in(path);
  const std::string magic = next_token(f);
  if (magic != "Pf") throw IoError("not a grayscale PFM: " + path);
  int w, h;
  double scale;
  try {
    w = std::stoi(next_token(f));
    h = std::stoi(next_token(f));
    scale = std::stod(next_token(f));
  } catch (const std::exception&) {
    throw IoError("malformed PFM header: " + path);
  }
  if (w <= 0 || h <= 0) throw IoError("bad PFM dimensions: " + path);
  if (scale >= 0.0) throw IoError("big-endian PFM not supported: " + path);
  f.get();  // single whitespace after the scale line

  DepthMap map(w, h);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()), w * sizeof(float));
    if (!f) throw IoError("truncated PFM payload: " + path);
    for (int x = 0; x < w; ++x) {
      if (row[x] >= 0.0f && std::isfinite(row[x])) map.set(x, y, row[x]);
    }
  }
  return map;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  auto f = open_out(path);
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row(img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::clamp(img.at(x, y), 0.0f, 1.0f);
      row[x] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    f.write(reinterpret_cast<const char*>(row.data()), img.width);
  }
  if (!f) throw IoError("write failed: " + path);
}

GrayImage read_pgm(const std::string& path) {
  auto f = open_in(path);
  if (next_token(f) != "P5") throw IoError("not a binary PGM: " + path);
  int w, h, maxval;
  try {
    w = std::stoi(next_token(f));
    h = std::stoi(next_token(f));
    maxval = std::stoi(next_token(f));
  } catch (const std::exception&) {
    throw IoError("malformed PGM header: " + path);
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported PGM: " + path);
  f.get();

  GrayImage img(w, h);
  std::vector<uint8_t> row(w);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), w);
    if (!f) throw IoError("truncated PGM payload: " + path);
    for (int x = 0; x < w; ++x) img.at(x, y) = row[x] / 255.0f;
  }
  return img;
}

void write_mask_pgm(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& mask) {
  auto f = open_out(path);
  f << "P5\n" << width << " " << height << "\n255\n";
  std::vector<uint8_t> row(width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x)
      row[x] = mask[static_cast<size_t>(y) * width + x] ? 255 : 0;
    f.write(reinterpret_cast<const char*>(row.data()), width);
  }
  if (!f) throw IoError("write failed: " + path);
}

std::vector<uint8_t> read_mask_pgm(const std::string& path, int& width, int& height) {
  const GrayImage img = read_pgm(path);
  width = img.width;
  height = img.height;
  std::vector<uint8_t> mask(img.values.size());
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = img.values[i] > 0.5f ? 1 : 0;
  return mask;
}

}  // namespace refdepth
