#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "apnea/errors.hpp"
#include "apnea/ingest.hpp"

using namespace apnea;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "apnea_ingest_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void push_u32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
    v.push_back((x >> 16) & 0xff);
    v.push_back((x >> 24) & 0xff);
}

void push_u16(std::vector<unsigned char>& v, std::uint16_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
}

// minimal PCM16 WAV with the given raw sample words
std::vector<unsigned char> pcm16_wav(std::uint32_t rate, std::uint16_t channels,
                                     const std::vector<std::int16_t>& samples) {
    std::vector<unsigned char> v;
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    v.insert(v.end(), {'R', 'I', 'F', 'F'});
    push_u32(v, 36 + data_bytes);
    v.insert(v.end(), {'W', 'A', 'V', 'E'});
    v.insert(v.end(), {'f', 'm', 't', ' '});
    push_u32(v, 16);
    push_u16(v, 1);  // PCM
    push_u16(v, channels);
    push_u32(v, rate);
    push_u32(v, rate * 2 * channels);
    push_u16(v, static_cast<std::uint16_t>(2 * channels));
    push_u16(v, 16);
    v.insert(v.end(), {'d', 'a', 't', 'a'});
    push_u32(v, data_bytes);
    for (const auto s : samples) push_u16(v, static_cast<std::uint16_t>(s));
    return v;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("wav: hand-written two-sample PCM16 file scales by 1/32768") {
    const auto path = temp_file("two_sample.wav");
    write_bytes(path, pcm16_wav(125, 1, {32767, -32768}));
    const auto signal = ingest::load_wav(path);
    CHECK(signal.sample_rate_hz == 125.0);
    REQUIRE(signal.samples.size() == 2);
    CHECK(signal.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));
    CHECK(signal.samples[1] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("wav: one second of silence at 125 Hz") {
    const auto path = temp_file("silence.wav");
    write_bytes(path, pcm16_wav(125, 1, std::vector<std::int16_t>(125, 0)));
    const auto signal = ingest::load_wav(path);
    CHECK(signal.samples.size() == 125);
    CHECK(signal.sample_rate_hz == 125.0);
    for (const auto s : signal.samples) CHECK(s == 0.0f);
}

TEST_CASE("wav: stereo file is rejected") {
    const auto path = temp_file("stereo.wav");
    write_bytes(path, pcm16_wav(125, 2, {0, 0, 0, 0}));
    CHECK_THROWS_WITH_AS(ingest::load_wav(path),
                         doctest::Contains("unsupported channel count"), DataError);
}

TEST_CASE("wav: unsupported encoding is rejected") {
    auto bytes = pcm16_wav(125, 1, {0, 0});
    bytes[20] = 6;  // format tag -> A-law
    const auto path = temp_file("alaw.wav");
    write_bytes(path, bytes);
    CHECK_THROWS_WITH_AS(ingest::load_wav(path), doctest::Contains("unsupported encoding"),
                         DataError);
}

TEST_CASE("wav: missing file") {
    CHECK_THROWS_AS(ingest::load_wav(temp_file("missing.wav")), DataError);
}

TEST_CASE("wav: writer round-trips within PCM16 quantization") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    for (int i = 0; i < 250; ++i)
        s.samples.push_back(static_cast<float>(0.7 * std::sin(0.1 * i)));
    const auto path = temp_file("roundtrip.wav");
    ingest::save_wav_pcm16(path, s);
    const auto back = ingest::load_wav(path);
    REQUIRE(back.samples.size() == s.samples.size());
    for (std::size_t i = 0; i < s.samples.size(); ++i)
        CHECK(std::abs(back.samples[i] - s.samples[i]) < 1.0f / 32768.0f);
}

TEST_CASE("resample: matching rate returns the input unchanged") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    s.samples = {0.1f, -0.2f, 0.3f};
    const auto out = ingest::resample(s, 125.0);
    CHECK(out.samples == s.samples);
    CHECK(out.sample_rate_hz == 125.0);
}

TEST_CASE("resample: constant signal stays constant under rate halving") {
    ingest::Signal s;
    s.sample_rate_hz = 250.0;
    s.samples.assign(500, 0.5f);
    const auto out = ingest::resample(s, 125.0);
    CHECK(out.sample_rate_hz == 125.0);
    CHECK(out.samples.size() == 250);
    for (const auto v : out.samples) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("resample: 10 Hz sine from 500 Hz to 125 Hz preserves amplitude") {
    ingest::Signal s;
    s.sample_rate_hz = 500.0;
    const double f = 10.0;
    for (int i = 0; i < 2000; ++i)
        s.samples.push_back(static_cast<float>(
            std::sin(2.0 * std::numbers::pi * f * i / s.sample_rate_hz)));
    const auto out = ingest::resample(s, 125.0);
    REQUIRE(out.samples.size() == 500);
    // compare against the sine evaluated at the output instants, away from edges
    for (std::size_t i = 50; i + 50 < out.samples.size(); ++i) {
        const double t = static_cast<double>(i) / 125.0;
        const double want = std::sin(2.0 * std::numbers::pi * f * t);
        CHECK(std::abs(out.samples[i] - want) < 0.01);
    }
}

TEST_CASE("resample: output duration within one output sample") {
    ingest::Signal s;
    s.sample_rate_hz = 440.0;
    s.samples.assign(990, 0.0f);  // 2.25 s
    const auto out = ingest::resample(s, 125.0);
    const double want = 2.25 * 125.0;
    CHECK(std::abs(static_cast<double>(out.samples.size()) - want) <= 1.0);
}

TEST_CASE("resample: rate idempotence") {
    ingest::Signal s;
    s.sample_rate_hz = 200.0;
    for (int i = 0; i < 400; ++i) s.samples.push_back(static_cast<float>(std::sin(0.05 * i)));
    const auto once = ingest::resample(s, 125.0);
    const auto twice = ingest::resample(once, 125.0);
    REQUIRE(once.samples.size() == twice.samples.size());
    for (std::size_t i = 0; i < once.samples.size(); ++i)
        CHECK(std::abs(once.samples[i] - twice.samples[i]) < 1e-6);
}

TEST_CASE("resample: non-positive target rate") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    s.samples = {0.0f};
    CHECK_THROWS_AS(ingest::resample(s, 0.0), ConfigError);
}

TEST_CASE("annotations: direct parse") {
    const auto path = temp_file("ann.csv");
    std::ofstream(path) << "record_id,onset_s,duration_s,label\nrec01,42.0,15.0,H\n";
    const auto events = ingest::parse_annotations(path);
    REQUIRE(events.size() == 1);
    CHECK(events[0].record_id == "rec01");
    CHECK(events[0].onset_s == 42.0);
    CHECK(events[0].duration_s == 15.0);
    CHECK(events[0].label == "H");
}

TEST_CASE("annotations: header-only file yields empty sequence") {
    const auto path = temp_file("ann_empty.csv");
    std::ofstream(path) << "record_id,onset_s,duration_s,label\n";
    CHECK(ingest::parse_annotations(path).empty());
}

TEST_CASE("annotations: CRLF and whitespace-trimmed labels") {
    const auto path = temp_file("ann_crlf.csv");
    std::ofstream(path) << "record_id,onset_s,duration_s,label\r\nrec01,1.0,2.0, H \r\n";
    const auto events = ingest::parse_annotations(path);
    REQUIRE(events.size() == 1);
    CHECK(events[0].label == "H");
}

TEST_CASE("annotations: zero duration reports the line number") {
    const auto path = temp_file("ann_zero.csv");
    std::ofstream(path) << "record_id,onset_s,duration_s,label\nrec01,1.0,0.0,H\n";
    CHECK_THROWS_WITH_AS(ingest::parse_annotations(path), doctest::Contains("line 2"), DataError);
}

TEST_CASE("annotations: non-numeric onset and missing header") {
    const auto bad = temp_file("ann_bad.csv");
    std::ofstream(bad) << "record_id,onset_s,duration_s,label\nrec01,abc,1.0,H\n";
    CHECK_THROWS_WITH_AS(ingest::parse_annotations(bad), doctest::Contains("non-numeric"),
                         DataError);
    const auto noheader = temp_file("ann_nohdr.csv");
    std::ofstream(noheader) << "rec01,1.0,2.0,H\n";
    CHECK_THROWS_WITH_AS(ingest::parse_annotations(noheader), doctest::Contains("header"),
                         DataError);
    const auto negative = temp_file("ann_neg.csv");
    std::ofstream(negative) << "record_id,onset_s,duration_s,label\nrec01,-1.0,2.0,H\n";
    CHECK_THROWS_WITH_AS(ingest::parse_annotations(negative), doctest::Contains("negative"),
                         DataError);
}

TEST_CASE("split: roles parsed, duplicates rejected") {
    const auto path = temp_file("split.csv");
    std::ofstream(path) << "record_id,role\nrec01,train\nrec02,test\n";
    const auto split = ingest::parse_split(path);
    CHECK(split.train_record_ids == std::vector<std::string>{"rec01"});
    CHECK(split.test_record_ids == std::vector<std::string>{"rec02"});

    const auto dup = temp_file("split_dup.csv");
    std::ofstream(dup) << "record_id,role\nrec01,train\nrec01,test\n";
    CHECK_THROWS_AS(ingest::parse_split(dup), DataError);
}

TEST_CASE("chunking: 90 s at 125 Hz gives 3 chunks of 3750 samples") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    s.samples.assign(90 * 125, 0.25f);
    const auto chunks = ingest::chunk_record(s, 30.0);
    REQUIRE(chunks.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(chunks[i].samples.size() == 3750);
        CHECK(chunks[i].index == i);
        CHECK(chunks[i].start_s == 30.0 * static_cast<double>(i));
    }
}

TEST_CASE("chunking: trailing partial window is dropped") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    s.samples.assign(100 * 125, 0.0f);
    CHECK(ingest::chunk_record(s, 30.0).size() == 3);
}

TEST_CASE("chunking: signal shorter than one chunk yields nothing") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    s.samples.assign(29 * 125, 0.0f);
    CHECK(ingest::chunk_record(s, 30.0).empty());
}

TEST_CASE("chunking: spans tile the record without overlap") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    s.samples.assign(7 * 3750 + 123, 0.0f);
    const auto chunks = ingest::chunk_record(s, 30.0);
    REQUIRE(chunks.size() == 7);
    double cursor = 0.0;
    std::size_t total = 0;
    for (const auto& c : chunks) {
        CHECK(c.start_s == cursor);
        cursor += 30.0;
        total += c.samples.size();
    }
    CHECK(total == 7 * 3750);
}

TEST_CASE("chunking: non-integer chunk length is rejected") {
    ingest::Signal s;
    s.sample_rate_hz = 125.0;
    s.samples.assign(1000, 0.0f);
    CHECK_THROWS_AS(ingest::chunk_record(s, 0.3), ConfigError);
}

TEST_CASE("labeling: overlapping H event marks apnea") {
    const std::vector<ingest::AnnotationEvent> events{{"r", 40.0, 15.0, "H"}};
    CHECK(ingest::label_chunk(30.0, 60.0, events, ingest::kDefaultApneaLabels));
}

TEST_CASE("labeling: no events means non-apnea") {
    CHECK_FALSE(ingest::label_chunk(30.0, 60.0, {}, ingest::kDefaultApneaLabels));
}

TEST_CASE("labeling: event starting at the right boundary does not overlap") {
    const std::vector<ingest::AnnotationEvent> events{{"r", 60.0, 10.0, "H"}};
    CHECK_FALSE(ingest::label_chunk(30.0, 60.0, events, ingest::kDefaultApneaLabels));
}

TEST_CASE("labeling: labels outside the apnea set are ignored") {
    const std::vector<ingest::AnnotationEvent> events{{"r", 40.0, 15.0, "MT"}};
    CHECK_FALSE(ingest::label_chunk(30.0, 60.0, events, ingest::kDefaultApneaLabels));
}

TEST_CASE("labeling: adding events never flips apnea to non-apnea") {
    std::vector<ingest::AnnotationEvent> events{{"r", 31.0, 5.0, "H"}};
    CHECK(ingest::label_chunk(30.0, 60.0, events, ingest::kDefaultApneaLabels));
    for (double onset = 0.0; onset < 100.0; onset += 7.0) {
        events.push_back({"r", onset, 3.0, "LA"});
        CHECK(ingest::label_chunk(30.0, 60.0, events, ingest::kDefaultApneaLabels));
    }
}

TEST_CASE("build_dataset: one train record with an event in the first chunk") {
    std::map<std::string, ingest::Signal> records;
    records["rec01"].sample_rate_hz = 125.0;
    records["rec01"].samples.assign(60 * 125, 0.1f);
    const std::vector<ingest::AnnotationEvent> events{{"rec01", 5.0, 10.0, "H"}};
    ingest::DatasetSplit split;
    split.train_record_ids = {"rec01"};
    const auto ds =
        ingest::build_dataset(records, events, split, 30.0, ingest::kDefaultApneaLabels);
    REQUIRE(ds.train.size() == 2);
    CHECK(ds.test.empty());
    CHECK(ds.train[0].label == 1);
    CHECK(ds.train[1].label == 0);
    CHECK(ds.train[0].record_id == "rec01");
}

TEST_CASE("build_dataset: unknown record id in split") {
    std::map<std::string, ingest::Signal> records;
    ingest::DatasetSplit split;
    split.train_record_ids = {"ghost"};
    CHECK_THROWS_WITH_AS(
        ingest::build_dataset(records, {}, split, 30.0, ingest::kDefaultApneaLabels),
        doctest::Contains("unknown record"), DataError);
}

TEST_CASE("build_dataset: record in both split roles") {
    std::map<std::string, ingest::Signal> records;
    records["rec01"].sample_rate_hz = 125.0;
    records["rec01"].samples.assign(3750, 0.0f);
    ingest::DatasetSplit split;
    split.train_record_ids = {"rec01"};
    split.test_record_ids = {"rec01"};
    CHECK_THROWS_WITH_AS(
        ingest::build_dataset(records, {}, split, 30.0, ingest::kDefaultApneaLabels),
        doctest::Contains("both train and test"), DataError);
}

}  // TEST_SUITE
