#include "pcflow/image.hpp"

#include <fstream>
#include <stdexcept>

namespace pcflow {

void quantize_image(Image& img) {
  for (float& v : img.rgb) v = quantize_byte(v);
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.rgb.size());
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    float v = img.rgb[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    bytes[i] = static_cast<unsigned char>(int(v * 255.0f + 0.5f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("unsupported PPM header: " + path.string());
  in.get();  // single whitespace after maxval
  Image img(w, h);
  std::vector<unsigned char> bytes(img.rgb.size());
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (std::size_t(in.gcount()) != bytes.size())
    throw std::runtime_error("truncated PPM: " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = float(bytes[i]) / 255.0f;
  return img;
}

}  // namespace pcflow
