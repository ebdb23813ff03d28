#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "tfcl/dataio/csv.hpp"
#include "tfcl/dataio/split.hpp"
#include "tfcl/dataio/synth.hpp"
#include "tfcl/dataio/window.hpp"

using namespace tfcl;
using namespace tfcl::dataio;
using nlohmann::json;

namespace {

json oracle(const std::string& name) {
    std::ifstream in(std::string(TFCL_ORACLE_DIR) + "/" + name);
    return json::parse(in);
}

RecordingSet parse(const std::string& text, double rate = 50.0) {
    std::istringstream in(text);
    return parse_csv(in, rate);
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::IoError;
}

std::set<std::string> subject_names(std::size_t n) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.insert("u" + std::to_string(100 + i));
    return out;
}

const std::vector<ClassSpec> kThree{{"slow", {2, 2, 2}}, {"mid", {4, 4, 4}}, {"fast", {6, 6, 6}}};

}  // namespace

TEST(LoadCsv, TwoRowsOneRecording) {
    const auto rs = parse("subject,label,x,y,z\na,walk,1,2,3\na,walk,4,5,6.5\n");
    ASSERT_EQ(rs.recordings.size(), 1u);
    EXPECT_EQ(rs.recordings[0].subject, "a");
    EXPECT_EQ(rs.recordings[0].label, "walk");
    ASSERT_EQ(rs.recordings[0].samples.size(), 2u);
    EXPECT_EQ(rs.recordings[0].samples[1], (Sample3{4, 5, 6.5}));
}

TEST(LoadCsv, HeaderOnlyAndEmptyFilesAreEmpty) {
    EXPECT_EQ(code_of([] { parse("subject,label,x,y,z\n"); }), ErrorCode::EmptyFile);
    EXPECT_EQ(code_of([] { parse(""); }), ErrorCode::EmptyFile);
}

TEST(LoadCsv, MalformedRows) {
    EXPECT_EQ(code_of([] { parse("subject,label,x,y,z\na,walk,1,2\n"); }), ErrorCode::MalformedRow);
    EXPECT_EQ(code_of([] { parse("subject,label,x,y,z\na,walk,1,two,3\n"); }), ErrorCode::MalformedRow);
    EXPECT_EQ(code_of([] { parse("subject,label,x,y,z\na,walk,1,2,3,4\n"); }), ErrorCode::MalformedRow);
    EXPECT_EQ(code_of([] { parse("time,label,x,y,z\na,walk,1,2,3\n"); }), ErrorCode::MalformedRow);
    EXPECT_EQ(code_of([] { parse("subject,label,x,y,z\na,walk,1,nan,3\n"); }), ErrorCode::MalformedRow);
}

TEST(LoadCsv, MissingFileIsAnIoError) {
    EXPECT_EQ(code_of([] { load_csv("/nonexistent/corpus.csv", 50.0); }), ErrorCode::IoError);
}

TEST(LoadCsv, RunBoundariesMatchLineCountingOracle) {
    const auto cases = oracle("dataio_cases.json");
    const auto rs = load_csv(std::string(TFCL_ORACLE_DIR) + "/mixed_corpus.csv", 50.0);
    EXPECT_EQ(rs.total_samples(), cases["rows"].get<std::size_t>());
    ASSERT_EQ(rs.recordings.size(), cases["recordings"].size());
    for (std::size_t i = 0; i < rs.recordings.size(); ++i) {
        EXPECT_EQ(rs.recordings[i].subject, cases["recordings"][i][0]);
        EXPECT_EQ(rs.recordings[i].label, cases["recordings"][i][1]);
        EXPECT_EQ(rs.recordings[i].samples.size(), cases["recordings"][i][2].get<std::size_t>());
    }
}

TEST(LoadCsv, WriteReadRoundTripIsExact) {
    const auto rs = synth_dataset(2, kThree, 2, 0.3, 5);
    std::ostringstream out;
    write_csv(rs, out);
    const auto back = parse(out.str());
    ASSERT_EQ(back.recordings.size(), rs.recordings.size());
    for (std::size_t i = 0; i < rs.recordings.size(); ++i) {
        EXPECT_EQ(back.recordings[i].subject, rs.recordings[i].subject);
        EXPECT_EQ(back.recordings[i].samples, rs.recordings[i].samples);
    }
}

TEST(Window, Arithmetic) {
    EXPECT_EQ(windows_per_recording(128, 128, 64), 1u);
    EXPECT_EQ(windows_per_recording(256, 128, 64), 3u);
    EXPECT_EQ(windows_per_recording(127, 128, 64), 0u);
    RecordingSet rs;
    rs.recordings.push_back({"a", "walk", std::vector<Sample3>(256)});
    const auto ws = window(rs);
    ASSERT_EQ(ws.windows.size(), 3u);
    EXPECT_EQ(ws.windows[0].source_offset, 0u);
    EXPECT_EQ(ws.windows[1].source_offset, 64u);
    EXPECT_EQ(ws.windows[2].source_offset, 128u);
}

TEST(Window, InvalidParams) {
    RecordingSet rs;
    rs.recordings.push_back({"a", "walk", std::vector<Sample3>(256)});
    EXPECT_EQ(code_of([&] { window(rs, 0, 64); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code_of([&] { window(rs, 128, 0); }), ErrorCode::InvalidParams);
}

TEST(Window, CountsMatchEnumerationOracle) {
    const auto cases = oracle("dataio_cases.json");
    const auto rs = load_csv(std::string(TFCL_ORACLE_DIR) + "/mixed_corpus.csv", 50.0);
    for (const auto& [key, expected] : cases["windows"].items()) {
        const auto slash = key.find('/');
        const std::size_t len = std::stoul(key.substr(0, slash));
        const std::size_t stride = std::stoul(key.substr(slash + 1));
        const auto ws = window(rs, len, stride);
        std::vector<std::size_t> per(rs.recordings.size(), 0);
        for (const auto& w : ws.windows) ++per[w.recording];
        std::size_t skipped = 0;
        for (std::size_t r = 0; r < per.size(); ++r) {
            EXPECT_EQ(per[r], expected[r].get<std::size_t>()) << key << " recording " << r;
            if (expected[r] == 0) ++skipped;
        }
        EXPECT_EQ(ws.skipped_recordings, skipped) << key;
    }
}

TEST(Window, ValuesEqualSourceSliceAndInheritMetadata) {
    const auto rs = load_csv(std::string(TFCL_ORACLE_DIR) + "/mixed_corpus.csv", 50.0);
    const auto ws = window(rs, 128, 32);
    EXPECT_EQ(ws.labels.names(), (std::vector<std::string>{"sit", "walk"}));
    for (const auto& w : ws.windows) {
        const auto& rec = rs.recordings[w.recording];
        EXPECT_EQ(w.subject, rec.subject);
        EXPECT_EQ(ws.labels.name(*w.label), rec.label);
        ASSERT_LE(w.source_offset + 128, rec.samples.size());
        for (std::size_t t = 0; t < 128; ++t)
            for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(w.values(t, c), rec.samples[w.source_offset + t][c]);
    }
}

TEST(Window, SuppliedLabelMapMustCoverLabels) {
    RecordingSet rs;
    rs.recordings.push_back({"a", "jog", std::vector<Sample3>(128)});
    const LabelMap labels(std::vector<std::string>{"sit", "walk"});
    EXPECT_EQ(code_of([&] { window(rs, 128, 64, &labels); }), ErrorCode::LabelsMissing);
}

TEST(Synth, NoiselessSinusoidIsBounded) {
    const auto rs = synth_dataset(3, {{"one", {1, 1, 1}, 1.0, 0.25}}, 2, 0.0, 9);
    for (const auto& r : rs.recordings)
        for (const auto& s : r.samples)
            for (double v : s) {
                EXPECT_GE(v, 0.25 - 1.0 - 1e-12);
                EXPECT_LE(v, 0.25 + 1.0 + 1e-12);
            }
    EXPECT_EQ(rs.sample_rate_hz, 50.0);
}

TEST(Synth, SeedDeterminism) {
    const auto a = synth_dataset(2, kThree, 1, 0.1, 1);
    const auto b = synth_dataset(2, kThree, 1, 0.1, 1);
    const auto c = synth_dataset(2, kThree, 1, 0.1, 2);
    for (std::size_t i = 0; i < a.recordings.size(); ++i) {
        EXPECT_EQ(a.recordings[i].samples, b.recordings[i].samples);
        EXPECT_NE(a.recordings[i].samples, c.recordings[i].samples);
    }
}

TEST(Synth, WindowCountByEnumeration) {
    const auto rs = synth_dataset(4, kThree, 10, 0.1, 3);
    const auto ws = window(rs, 128, 128);
    EXPECT_EQ(ws.windows.size(), 120u);
    std::map<std::pair<std::string, int>, int> per;
    for (const auto& w : ws.windows) ++per[{w.subject, *w.label}];
    EXPECT_EQ(per.size(), 12u);
    for (const auto& [k, n] : per) EXPECT_EQ(n, 10);
}

TEST(Synth, DuplicateFrequenciesRejected) {
    EXPECT_EQ(code_of([] { synth_dataset(2, {{"a", {2, 2, 2}}, {"b", {2, 2, 2}}}, 1, 0.1, 0); }),
              ErrorCode::InvalidSpec);
}

TEST(Splits, TenSubjectExamples) {
    const auto subjects = subject_names(10);
    const auto s1 = make_splits(subjects, Scheme::Scheme1, 4);
    ASSERT_EQ(s1.folds.size(), 5u);
    for (const auto& f : s1.folds) EXPECT_EQ(f.test.size(), 2u);
    const auto s2 = make_splits(subjects, Scheme::Scheme2, 4, 0.2, 0.2);
    ASSERT_EQ(s2.folds.size(), 1u);
    EXPECT_EQ(s2.folds[0].test.size(), 2u);
    EXPECT_EQ(s2.folds[0].train.size() + s2.folds[0].val.size(), 8u);
}

TEST(Splits, TooFewSubjects) {
    EXPECT_EQ(code_of([] { make_splits(subject_names(4), Scheme::Scheme1, 0); }), ErrorCode::TooFewSubjects);
    EXPECT_EQ(code_of([] { make_splits(subject_names(1), Scheme::Scheme2, 0); }), ErrorCode::TooFewSubjects);
}

// 100 seeded plans per scheme over varied subject counts: exact disjointness,
// coverage and balance.
TEST(Splits, HundredSeededPlansKeepSubjectsDisjoint) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::size_t n = 5 + seed % 21;
        const auto subjects = subject_names(n);
        for (Scheme scheme : {Scheme::Scheme1, Scheme::Scheme2}) {
            const auto plan = make_splits(subjects, scheme, seed);
            EXPECT_EQ(plan, make_splits(subjects, scheme, seed));
            EXPECT_EQ(to_json(plan).dump(), to_json(make_splits(subjects, scheme, seed)).dump());
            std::multiset<std::string> test_union;
            std::size_t lo = n, hi = 0;
            for (const auto& f : plan.folds) {
                std::set<std::string> all;
                for (const auto* part : {&f.train, &f.val, &f.test}) {
                    for (const auto& s : *part) {
                        ASSERT_TRUE(all.insert(s).second) << "subject " << s << " in two sets, seed " << seed;
                        ASSERT_TRUE(subjects.count(s));
                    }
                }
                EXPECT_EQ(all, subjects);
                EXPECT_FALSE(f.train.empty());
                EXPECT_FALSE(f.val.empty());
                test_union.insert(f.test.begin(), f.test.end());
                lo = std::min(lo, f.test.size());
                hi = std::max(hi, f.test.size());
            }
            if (scheme == Scheme::Scheme1) {
                ASSERT_EQ(plan.folds.size(), 5u);
                EXPECT_EQ(test_union, std::multiset<std::string>(subjects.begin(), subjects.end()));
                EXPECT_LE(hi - lo, 1u);
            } else {
                ASSERT_EQ(plan.folds.size(), 1u);
                EXPECT_EQ(plan.folds[0].test.size(),
                          std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * n))));
            }
        }
    }
}

TEST(Splits, WindowsFollowTheirSubject) {
    const auto ws = window(synth_dataset(6, kThree, 3, 0.1, 2), 128, 64);
    const auto plan = make_splits(ws.windows, Scheme::Scheme1, 12);
    for (const auto& f : plan.folds) {
        const auto test = select_subjects(ws.windows, f.test);
        const auto train = select_subjects(ws.windows, f.train);
        for (const auto& w : test) EXPECT_TRUE(f.test.count(w.subject));
        for (const auto& w : train) EXPECT_FALSE(f.test.count(w.subject));
        EXPECT_EQ(test.size(), f.test.size() * 3 * 5);
    }
}
