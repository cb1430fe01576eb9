#include "parallax/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>

namespace parallax::io {

namespace {

std::vector<std::uint8_t> encode_mat(const cv::Mat& mat) {
  std::vector<std::uint8_t> out;
  // Fixed compression parameters keep output bytes reproducible.
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6, cv::IMWRITE_PNG_STRATEGY,
                                cv::IMWRITE_PNG_STRATEGY_DEFAULT};
  if (!cv::imencode(".png", mat, out, params)) throw Error("png encode failed");
  return out;
}

cv::Mat decode_mat(std::span<const std::uint8_t> bytes, int flags) {
  if (bytes.empty()) throw Error("unreadable image");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat;
  try {
    mat = cv::imdecode(buf, flags);
  } catch (const cv::Exception&) {
    throw Error("unreadable image");
  }
  if (mat.empty()) throw Error("unreadable image");
  return mat;
}

}  // namespace

std::uint8_t quantize8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

std::uint16_t quantize16(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

std::vector<std::uint8_t> encode_png8(const Raster<std::uint8_t>& raster) {
  cv::Mat mat(raster.height(), raster.width(), CV_8UC1, const_cast<std::uint8_t*>(raster.data().data()));
  return encode_mat(mat);
}

std::vector<std::uint8_t> encode_png16(const Raster<std::uint16_t>& raster) {
  cv::Mat mat(raster.height(), raster.width(), CV_16UC1, const_cast<std::uint16_t*>(raster.data().data()));
  return encode_mat(mat);
}

std::vector<std::uint8_t> encode_gray(const ImageGray& image) {
  Raster<std::uint8_t> q(image.width(), image.height());
  std::transform(image.data().begin(), image.data().end(), q.data().begin(), quantize8);
  return encode_png8(q);
}

ImageGray decode_gray(std::span<const std::uint8_t> bytes) {
  cv::Mat mat = decode_mat(bytes, cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  ImageGray out(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    for (int x = 0; x < mat.cols; ++x) {
      out.at(x, y) = mat.depth() == CV_16U ? static_cast<float>(mat.at<std::uint16_t>(y, x) / 65535.0)
                                           : static_cast<float>(mat.at<std::uint8_t>(y, x) / 255.0);
    }
  }
  return out;
}

Raster<std::uint16_t> decode_png16(std::span<const std::uint8_t> bytes) {
  cv::Mat mat = decode_mat(bytes, cv::IMREAD_UNCHANGED);
  if (mat.type() != CV_16UC1) throw Error("expected 16-bit grayscale png");
  Raster<std::uint16_t> out(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y)
    std::copy_n(mat.ptr<std::uint16_t>(y), mat.cols, &out.at(0, y));
  return out;
}

Raster<std::uint8_t> decode_png8(std::span<const std::uint8_t> bytes) {
  cv::Mat mat = decode_mat(bytes, cv::IMREAD_UNCHANGED);
  if (mat.type() != CV_8UC1) throw Error("expected 8-bit grayscale png");
  Raster<std::uint8_t> out(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y)
    std::copy_n(mat.ptr<std::uint8_t>(y), mat.cols, &out.at(0, y));
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

ImageGray read_gray(const std::filesystem::path& path) { return decode_gray(read_file(path)); }

void write_gray(const std::filesystem::path& path, const ImageGray& image) {
  write_file(path, encode_gray(image));
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  Raster<std::uint8_t> q(mask.width(), mask.height());
  std::transform(mask.data().begin(), mask.data().end(), q.data().begin(),
                 [](std::uint8_t m) -> std::uint8_t { return m ? 255 : 0; });
  write_file(path, encode_png8(q));
}

Mask read_mask(const std::filesystem::path& path) {
  Raster<std::uint8_t> q = decode_png8(read_file(path));
  for (auto& v : q.data()) v = v >= 128 ? 1 : 0;
  return q;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace parallax::io
