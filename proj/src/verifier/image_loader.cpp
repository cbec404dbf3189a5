//===- image_loader.cpp - VKM1 container parser ---------------------------===//

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "venkman/verifier.hpp"

namespace venkman::verifier {
namespace {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  template <typename T>
  T read(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw LoadError(std::string("truncated image: missing ") + what + " at byte " + std::to_string(pos_));
    }
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(bytes_[pos_ + k]) << (8 * k);
    pos_ += sizeof(T);
    return v;
  }

  std::string read_string(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw LoadError("truncated image: symbol name at byte " + std::to_string(pos_));
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

LayoutImage load_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw LoadError("truncated image: missing magic");
  if (std::memcmp(bytes.data(), kImageMagic, 4) != 0) throw LoadError("bad magic: not a VKM1 image");
  Reader r(bytes.subspan(4));
  LayoutImage img;
  img.bundle_size = r.read<std::uint32_t>("bundle_size");
  img.base_address = r.read<std::uint64_t>("base_address");
  const auto count = r.read<std::uint32_t>("bundle_count");
  const auto nsyms = r.read<std::uint32_t>("symbol_count");
  if (img.bundle_size < 4 || !std::has_single_bit(img.bundle_size)) {
    throw LoadError("bundle size " + std::to_string(img.bundle_size) + " is not a power of two >= 4");
  }
  for (std::uint32_t k = 0; k < nsyms; ++k) {
    const auto len = r.read<std::uint32_t>("symbol name length");
    Symbol s;
    s.name = r.read_string(len);
    s.address = r.read<std::uint64_t>("symbol address");
    img.symbols.push_back(std::move(s));
  }
  const std::uint64_t want = static_cast<std::uint64_t>(count) * img.bundle_size;
  if (r.remaining() != want) {
    throw LoadError("bundle_count " + std::to_string(count) + " x bundle_size " + std::to_string(img.bundle_size) +
                    " does not match " + std::to_string(r.remaining()) + " code bytes");
  }
  const std::size_t per = img.bundle_size / 4;
  img.bundles.resize(count);
  for (std::uint32_t b = 0; b < count; ++b) {
    img.bundles[b].base_addr = img.base_address + static_cast<std::uint64_t>(b) * img.bundle_size;
    img.bundles[b].words.reserve(per);
    for (std::size_t k = 0; k < per; ++k) img.bundles[b].words.push_back(r.read<std::uint32_t>("bundle word"));
  }
  return img;
}

LayoutImage load_image_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_image(bytes);
}

}  // namespace venkman::verifier
