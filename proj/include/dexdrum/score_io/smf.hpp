#pragma once

// Standard MIDI File reader (formats 0 and 1). Only what the drum pipeline
// needs is interpreted: note-on events on the percussion channel and tempo
// meta events. Everything else is parsed for framing and skipped.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "dexdrum/common/error.hpp"
#include "dexdrum/score_io/score.hpp"

namespace dexdrum::score {

inline constexpr int kPercussionChannel = 9;  // channel 10, zero-based
inline constexpr std::uint32_t kDefaultTempoUsPerQuarter = 500000;

struct PercussionNote {
  double time_s = 0.0;
  int note = 0;
  int velocity = 0;
};

struct SmfContents {
  int format = 0;
  int n_tracks = 0;
  int division = 0;  // raw header field
  std::vector<PercussionNote> notes;  // sorted by time
  double end_time_s = 0.0;
  double first_tempo_bpm = 120.0;
};

namespace detail {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, ErrorKind eof_kind)
      : bytes_(bytes), eof_kind_(eof_kind) {}

  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() {
    if (at_end()) throw Error(eof_kind_, "unexpected end of data");
    return bytes_[pos_++];
  }
  std::uint8_t peek() const {
    if (at_end()) throw Error(eof_kind_, "unexpected end of data");
    return bytes_[pos_];
  }
  std::uint16_t u16be() {
    const auto hi = u8();
    return static_cast<std::uint16_t>((hi << 8) | u8());
  }
  std::uint32_t u32be() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  // Variable-length quantity: at most four bytes, 7 bits each.
  std::uint32_t varint() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const auto b = u8();
      v = (v << 7) | (b & 0x7Fu);
      if ((b & 0x80u) == 0) return v;
    }
    throw Error(ErrorKind::kBadVarint, "variable-length quantity exceeds 4 bytes");
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n) throw Error(eof_kind_, "unexpected end of data");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) { take(n); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  ErrorKind eof_kind_;
};

struct TickNote {
  std::uint64_t tick;
  int note;
  int velocity;
};

struct TempoChange {
  std::uint64_t tick;
  std::uint32_t us_per_quarter;
};

// Converts absolute ticks to seconds through the merged tempo map.
class TickClock {
 public:
  TickClock(int division, std::vector<TempoChange> tempi)
      : division_(division), tempi_(std::move(tempi)) {
    std::stable_sort(tempi_.begin(), tempi_.end(),
                     [](const auto& a, const auto& b) { return a.tick < b.tick; });
  }

  double seconds(std::uint64_t tick) const {
    if (division_ & 0x8000) {
      // SMPTE: negative frames-per-second in the high byte, ticks per frame
      // in the low byte. Tempo does not apply.
      const int fps = -static_cast<std::int8_t>((division_ >> 8) & 0xFF);
      const int tpf = division_ & 0xFF;
      return static_cast<double>(tick) / (static_cast<double>(fps) * tpf);
    }
    double t = 0.0;
    std::uint64_t last_tick = 0;
    std::uint32_t tempo = kDefaultTempoUsPerQuarter;
    for (const auto& tc : tempi_) {
      if (tc.tick >= tick) break;
      t += span_seconds(tc.tick - last_tick, tempo);
      last_tick = tc.tick;
      tempo = tc.us_per_quarter;
    }
    return t + span_seconds(tick - last_tick, tempo);
  }

 private:
  double span_seconds(std::uint64_t ticks, std::uint32_t tempo) const {
    return static_cast<double>(ticks) * static_cast<double>(tempo) * 1e-6 /
           static_cast<double>(division_);
  }

  int division_;
  std::vector<TempoChange> tempi_;
};

inline void parse_track(std::span<const std::uint8_t> data,
                        std::vector<TickNote>& notes,
                        std::vector<TempoChange>& tempi,
                        std::uint64_t& end_tick) {
  ByteReader r(data, ErrorKind::kTruncatedTrack);
  std::uint64_t tick = 0;
  std::uint8_t running = 0;
  while (!r.at_end()) {
    tick += r.varint();
    std::uint8_t status = r.peek();
    if (status & 0x80) {
      r.u8();
    } else {
      if (running == 0) {
        throw Error(ErrorKind::kTruncatedTrack, "data byte without running status");
      }
      status = running;
    }

    if (status == 0xFF) {
      const auto type = r.u8();
      const auto len = r.varint();
      auto payload = r.take(len);
      if (type == 0x51 && len == 3) {
        const std::uint32_t us = (std::uint32_t{payload[0]} << 16) |
                                 (std::uint32_t{payload[1]} << 8) | payload[2];
        if (us > 0) tempi.push_back({tick, us});
      } else if (type == 0x2F) {
        end_tick = std::max(end_tick, tick);
        return;
      }
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      r.skip(r.varint());
      running = 0;
      continue;
    }
    if (status >= 0xF0) {
      // System common / real-time bytes do not belong in files; tolerate the
      // fixed-size ones.
      static constexpr int kLen[16] = {0, 1, 2, 1, 0, 0, 0, 0,
                                       0, 0, 0, 0, 0, 0, 0, 0};
      r.skip(static_cast<std::size_t>(kLen[status & 0x0F]));
      continue;
    }

    running = status;
    const int kind = status & 0xF0;
    const int channel = status & 0x0F;
    const int n_data = (kind == 0xC0 || kind == 0xD0) ? 1 : 2;
    const int d1 = r.u8() & 0x7F;
    const int d2 = n_data == 2 ? (r.u8() & 0x7F) : 0;
    if (kind == 0x90 && d2 > 0 && channel == kPercussionChannel) {
      notes.push_back({tick, d1, d2});
    }
    end_tick = std::max(end_tick, tick);
  }
  end_tick = std::max(end_tick, tick);
}

}  // namespace detail

inline SmfContents parse_smf_notes(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorKind::kMalformedHeader);
  if (r.remaining() < 14) {
    throw Error(ErrorKind::kMalformedHeader, "file shorter than an SMF header");
  }
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), "MThd")) {
    throw Error(ErrorKind::kMalformedHeader, "missing MThd magic");
  }
  const auto header_len = r.u32be();
  if (header_len < 6) {
    throw Error(ErrorKind::kMalformedHeader,
                "header length " + std::to_string(header_len) + " < 6");
  }
  SmfContents out;
  out.format = r.u16be();
  out.n_tracks = r.u16be();
  out.division = r.u16be();
  if (header_len > 6) {
    if (r.remaining() < header_len - 6) {
      throw Error(ErrorKind::kMalformedHeader, "header length exceeds file");
    }
    r.skip(header_len - 6);
  }
  if (out.format == 2) {
    throw Error(ErrorKind::kUnsupportedFormat, "SMF format 2 is not supported");
  }
  if (out.format > 2) {
    throw Error(ErrorKind::kMalformedHeader,
                "unknown SMF format " + std::to_string(out.format));
  }
  if (out.division == 0) {
    throw Error(ErrorKind::kMalformedHeader, "division of zero");
  }

  std::vector<detail::TickNote> notes;
  std::vector<detail::TempoChange> tempi;
  std::uint64_t end_tick = 0;
  int tracks_seen = 0;
  detail::ByteReader chunks(bytes.subspan(8 + header_len),
                            ErrorKind::kTruncatedTrack);
  while (tracks_seen < out.n_tracks) {
    if (chunks.remaining() < 8) {
      throw Error(ErrorKind::kTruncatedTrack,
                  "expected " + std::to_string(out.n_tracks) + " tracks, found " +
                      std::to_string(tracks_seen));
    }
    auto id = chunks.take(4);
    const auto len = chunks.u32be();
    if (chunks.remaining() < len) {
      throw Error(ErrorKind::kTruncatedTrack, "chunk length exceeds file");
    }
    auto body = chunks.take(len);
    if (!std::equal(id.begin(), id.end(), "MTrk")) continue;  // alien chunk
    detail::parse_track(body, notes, tempi, end_tick);
    ++tracks_seen;
  }

  if (!tempi.empty()) {
    auto first = std::min_element(
        tempi.begin(), tempi.end(),
        [](const auto& a, const auto& b) { return a.tick < b.tick; });
    out.first_tempo_bpm = 60e6 / first->us_per_quarter;
  }
  detail::TickClock clock(out.division, std::move(tempi));
  std::stable_sort(notes.begin(), notes.end(),
                   [](const auto& a, const auto& b) { return a.tick < b.tick; });
  out.notes.reserve(notes.size());
  for (const auto& n : notes) {
    out.notes.push_back({clock.seconds(n.tick), n.note, n.velocity});
  }
  out.end_time_s = clock.seconds(end_tick);
  return out;
}

// Parses a Standard MIDI File into a drum score. Percussion notes the kit
// profile does not map are skipped.
inline DrumScore parse_smf(std::span<const std::uint8_t> bytes,
                           KitProfile kit = KitProfile::kFullKit) {
  const auto contents = parse_smf_notes(bytes);
  DrumScore s;
  s.bpm = contents.first_tempo_bpm;
  for (const auto& n : contents.notes) {
    if (auto d = map_percussion(n.note, kit)) {
      s.events.push_back({n.time_s, *d, n.velocity});
    }
  }
  s.duration_s = contents.end_time_s;
  if (!s.events.empty()) s.duration_s = std::max(s.duration_s, s.events.back().time_s);
  return s;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace dexdrum::score
