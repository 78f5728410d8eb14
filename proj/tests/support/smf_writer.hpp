#pragma once

// Minimal Standard MIDI File writer for test fixtures.

#include <cstdint>
#include <string>
#include <vector>

namespace dexdrum::fixtures {

class SmfTrack {
 public:
  void note_on(std::uint32_t delta, int note, int velocity, int channel = 9) {
    varint(delta);
    bytes_.push_back(static_cast<std::uint8_t>(0x90 | channel));
    bytes_.push_back(static_cast<std::uint8_t>(note));
    bytes_.push_back(static_cast<std::uint8_t>(velocity));
  }
  // Status byte omitted: relies on running status from the previous event.
  void running(std::uint32_t delta, int note, int velocity) {
    varint(delta);
    bytes_.push_back(static_cast<std::uint8_t>(note));
    bytes_.push_back(static_cast<std::uint8_t>(velocity));
  }
  void note_off(std::uint32_t delta, int note, int channel = 9) {
    varint(delta);
    bytes_.push_back(static_cast<std::uint8_t>(0x80 | channel));
    bytes_.push_back(static_cast<std::uint8_t>(note));
    bytes_.push_back(0);
  }
  void tempo(std::uint32_t delta, std::uint32_t us_per_quarter) {
    varint(delta);
    for (int b : {0xFF, 0x51, 0x03}) bytes_.push_back(static_cast<std::uint8_t>(b));
    bytes_.push_back(static_cast<std::uint8_t>(us_per_quarter >> 16));
    bytes_.push_back(static_cast<std::uint8_t>(us_per_quarter >> 8));
    bytes_.push_back(static_cast<std::uint8_t>(us_per_quarter));
  }
  void text(std::uint32_t delta, const std::string& s) {
    varint(delta);
    bytes_.push_back(0xFF);
    bytes_.push_back(0x01);
    varint(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void end(std::uint32_t delta = 0) {
    varint(delta);
    for (int b : {0xFF, 0x2F, 0x00}) bytes_.push_back(static_cast<std::uint8_t>(b));
  }
  void raw(std::initializer_list<int> b) {
    for (int x : b) bytes_.push_back(static_cast<std::uint8_t>(x));
  }
  void varint(std::uint32_t v) {
    std::uint8_t buf[5];
    int n = 0;
    buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
    while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
    while (n) bytes_.push_back(buf[--n]);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::vector<std::uint8_t> make_smf(int format, std::uint16_t division,
                                          const std::vector<SmfTrack>& tracks) {
  std::vector<std::uint8_t> out{'M', 'T', 'h', 'd'};
  put_u32(out, 6);
  put_u16(out, static_cast<std::uint16_t>(format));
  put_u16(out, static_cast<std::uint16_t>(tracks.size()));
  put_u16(out, division);
  for (const auto& t : tracks) {
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32(out, static_cast<std::uint32_t>(t.bytes().size()));
    out.insert(out.end(), t.bytes().begin(), t.bytes().end());
  }
  return out;
}

}  // namespace dexdrum::fixtures
