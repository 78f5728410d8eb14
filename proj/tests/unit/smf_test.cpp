#include <gtest/gtest.h>

#include <random>

#include "dexdrum/score_io/smf.hpp"
#include "support/smf_writer.hpp"

using namespace dexdrum;
using namespace dexdrum::score;
using dexdrum::fixtures::make_smf;
using dexdrum::fixtures::SmfTrack;

namespace {

ErrorKind kind_of(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_smf(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;  // sentinel: no error
}

}  // namespace

TEST(Smf, SnareAtOneBeat) {
  SmfTrack t;
  t.note_on(480, 38, 100);
  t.end();
  auto s = parse_smf(make_smf(0, 480, {t}));
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_DOUBLE_EQ(s.events[0].time_s, 0.5);
  EXPECT_EQ(s.events[0].drum, DrumId::kSnare);
  EXPECT_EQ(s.events[0].velocity, 100);
}

TEST(Smf, ExplicitTempoIsQuarterHalfSecond) {
  SmfTrack t;
  t.tempo(0, 500000);
  t.note_on(96, 42, 80);
  t.end();
  auto s = parse_smf(make_smf(0, 96, {t}));
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_DOUBLE_EQ(s.events[0].time_s, 0.5);
  EXPECT_DOUBLE_EQ(s.bpm, 120.0);
}

TEST(Smf, EmptyTrack) {
  SmfTrack t;
  t.end();
  auto s = parse_smf(make_smf(0, 480, {t}));
  EXPECT_TRUE(s.events.empty());
}

TEST(Smf, TempoChangeMidStream) {
  SmfTrack t;
  t.note_on(480, 38, 100);   // 0.5 s at 120 BPM
  t.tempo(0, 1000000);       // 60 BPM from here
  t.note_on(480, 38, 100);   // +1.0 s
  t.end();
  auto s = parse_smf(make_smf(0, 480, {t}));
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_DOUBLE_EQ(s.events[1].time_s, 1.5);
}

TEST(Smf, Format1TempoTrackAppliesToOtherTracks) {
  SmfTrack tempo;
  tempo.tempo(0, 250000);  // 240 BPM
  tempo.end();
  SmfTrack drums;
  drums.note_on(480, 49, 90);
  drums.end();
  auto s = parse_smf(make_smf(1, 480, {tempo, drums}));
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_DOUBLE_EQ(s.events[0].time_s, 0.25);
  EXPECT_EQ(s.events[0].drum, DrumId::kCrash);
}

TEST(Smf, IgnoresOtherChannelsAndZeroVelocity) {
  SmfTrack t;
  t.note_on(0, 38, 100, 0);  // piano channel
  t.note_on(10, 38, 0);      // note-off spelled as note-on
  t.note_off(10, 38);
  t.note_on(10, 45, 70);
  t.end();
  auto s = parse_smf(make_smf(0, 480, {t}));
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_EQ(s.events[0].drum, DrumId::kTom);
}

TEST(Smf, RunningStatusAndMetaText) {
  SmfTrack t;
  t.text(0, "groove");
  t.note_on(240, 38, 100);
  t.running(240, 42, 100);
  t.end();
  auto s = parse_smf(make_smf(0, 480, {t}));
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_DOUBLE_EQ(s.events[0].time_s, 0.25);
  EXPECT_DOUBLE_EQ(s.events[1].time_s, 0.5);
  EXPECT_EQ(s.events[1].drum, DrumId::kHiHat);
}

TEST(Smf, TwoDrumProfile) {
  SmfTrack t;
  t.note_on(0, 49, 100);
  t.note_on(480, 48, 100);
  t.end();
  auto s = parse_smf(make_smf(0, 480, {t}), KitProfile::kTwoDrum);
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_EQ(s.events[0].drum, DrumId::kHiHat);
  EXPECT_EQ(s.events[1].drum, DrumId::kSnare);
}

TEST(Smf, SmpteDivision) {
  SmfTrack t;
  t.note_on(50, 38, 100);
  t.end();
  // -25 fps, 40 ticks per frame -> 1000 ticks per second
  const std::uint16_t division = static_cast<std::uint16_t>((0xE7 << 8) | 40);
  auto s = parse_smf(make_smf(0, division, {t}));
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_DOUBLE_EQ(s.events[0].time_s, 0.05);
}

TEST(SmfErrors, BadMagic) {
  auto b = make_smf(0, 480, {});
  b[0] = 'X';
  EXPECT_EQ(kind_of(b), ErrorKind::kMalformedHeader);
}

TEST(SmfErrors, ShortHeader) {
  std::vector<std::uint8_t> b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0};
  EXPECT_EQ(kind_of(b), ErrorKind::kMalformedHeader);
  auto c = make_smf(0, 480, {});
  c[7] = 4;  // header length < 6
  EXPECT_EQ(kind_of(c), ErrorKind::kMalformedHeader);
}

TEST(SmfErrors, Format2) {
  SmfTrack t;
  t.end();
  EXPECT_EQ(kind_of(make_smf(2, 480, {t})), ErrorKind::kUnsupportedFormat);
}

TEST(SmfErrors, TruncatedMidEvent) {
  SmfTrack t;
  t.varint(0);
  t.raw({0x99, 38});  // note-on missing its velocity byte
  EXPECT_EQ(kind_of(make_smf(0, 480, {t})), ErrorKind::kTruncatedTrack);
}

TEST(SmfErrors, MissingTrackChunk) {
  SmfTrack t;
  t.end();
  auto b = make_smf(0, 480, {t});
  b[11] = 2;  // header claims two tracks
  EXPECT_EQ(kind_of(b), ErrorKind::kTruncatedTrack);
}

TEST(SmfErrors, FiveByteVarint) {
  SmfTrack t;
  t.raw({0x81, 0x80, 0x80, 0x80, 0x00, 0x99, 38, 100});
  EXPECT_EQ(kind_of(make_smf(0, 480, {t})), ErrorKind::kBadVarint);
}

TEST(SmfVarint, FourByteMaximum) {
  SmfTrack t;
  t.note_on(0x0FFFFFFF, 38, 100);
  t.end();
  auto s = parse_smf(make_smf(0, 480, {t}));
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_DOUBLE_EQ(s.events[0].time_s, 0x0FFFFFFF / 480.0 * 0.5);
}

// Writes random scores through the fixture writer and checks each event comes
// back within one tick.
TEST(SmfProperty, RoundTripWithinOneTick) {
  std::mt19937_64 rng(3);
  const std::vector<int> notes = {38, 45, 51, 42, 49};
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint16_t division = std::uniform_int_distribution<int>(24, 960)(rng) & 0x7FFF;
    const std::uint32_t tempo = std::uniform_int_distribution<std::uint32_t>(250000, 1500000)(rng);
    const double tick_s = tempo * 1e-6 / division;
    std::uniform_real_distribution<double> t(0.0, 20.0);
    std::vector<std::pair<double, int>> events;
    for (int i = 0; i < 25; ++i) events.push_back({t(rng), notes[rng() % notes.size()]});
    std::sort(events.begin(), events.end());

    SmfTrack track;
    track.tempo(0, tempo);
    std::uint64_t last = 0;
    for (auto [time, note] : events) {
      const auto tick = static_cast<std::uint64_t>(std::llround(time / tick_s));
      track.note_on(static_cast<std::uint32_t>(tick - last), note, 100);
      last = tick;
    }
    track.end();
    auto s = parse_smf(make_smf(0, division, {track}));
    ASSERT_EQ(s.events.size(), events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
      EXPECT_NEAR(s.events[i].time_s, events[i].first, tick_s + 1e-12);
      EXPECT_EQ(s.events[i].drum, *map_percussion(events[i].second, KitProfile::kFullKit));
    }
  }
}
