#include "doctest.h"

#include <random>

#include "corpora.hpp"
#include "support.hpp"
#include "droidretriever/errors.hpp"
#include "droidretriever/report.hpp"

using namespace dr;

namespace {

std::shared_ptr<const EvidenceRecord> record(int id, const std::vector<std::string>& texts) {
    auto r = std::make_shared<EvidenceRecord>();
    r->evidence_id = id;
    r->long_image = Image(1080, 2244);
    int i = 0;
    for (const auto& t : texts) {
        r->grounding.elements.push_back({i, t, ElementKind::text, {60, 100 + 150 * i, 900, 200 + 150 * i}, false});
        ++i;
    }
    r->description = describe(r->grounding).text;
    return r;
}

// Plain full-matrix edit distance over lowercase ASCII.
std::size_t oracle_distance(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] != b[j - 1]);
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
        }
    return d[a.size()][b.size()];
}

double oracle_similarity(const std::string& a, const std::string& b) {
    const auto m = std::max(a.size(), b.size());
    return m == 0 ? 1.0 : 1.0 - static_cast<double>(oracle_distance(a, b)) / static_cast<double>(m);
}

std::string random_word(std::mt19937& rng, int min_len, int max_len) {
    std::uniform_int_distribution<int> len(min_len, max_len), ch(0, 4);
    std::string s(static_cast<std::size_t>(len(rng)), 'a');
    for (auto& c : s) c = static_cast<char>('a' + ch(rng));
    return s;
}

}  // namespace

TEST_CASE("reference citation samples") {
    const auto a = report::parse_citations(drt::corpora::kCitationSamples[0]);
    REQUIRE(a.citations.size() == 1);
    CHECK(a.citations[0].evidence_id == 1);
    CHECK(a.citations[0].quoted_text == "120");
    CHECK(a.malformed == 0);

    const auto b = report::parse_citations(drt::corpora::kCitationSamples[1]);
    REQUIRE(b.citations.size() == 1);
    CHECK(b.citations[0].evidence_id == 2);
    CHECK(b.citations[0].quoted_text == "450g small capacity");

    const auto g = report::parse_citations(drt::corpora::kCitationSamples[2]);
    REQUIRE(g.citations.size() == 2);
    REQUIRE(g.spans.size() == 1);
    CHECK(g.spans[0].citations.size() == 2);
    CHECK(g.citations[0].quoted_text == "xxx");
    CHECK(g.citations[1].evidence_id == 2);
    CHECK(g.citations[1].quoted_text == "yyy");
}

TEST_CASE("parse_citations edge cases") {
    CHECK(report::parse_citations("no citations at all [link](x)").citations.empty());
    CHECK(report::parse_citations("").citations.empty());

    const auto nested = report::parse_citations("x[3(size (large) only)] y");
    REQUIRE(nested.citations.size() == 1);
    CHECK(nested.citations[0].quoted_text == "size (large) only");

    const auto brackets = report::parse_citations("[4(tag [new] here)]");
    REQUIRE(brackets.citations.size() == 1);
    CHECK(brackets.citations[0].quoted_text == "tag [new] here");

    const auto two = report::parse_citations("a[1(x)] and b[2(y)].");
    CHECK(two.citations.size() == 2);
    CHECK(two.spans.size() == 2);
}

TEST_CASE("malformed citations are counted, never thrown") {
    REQUIRE(drt::corpora::kMalformedCitations.size() >= 20);
    for (const auto& s : drt::corpora::kMalformedCitations) {
        CAPTURE(s);
        ParsedCitations p;
        CHECK_NOTHROW(p = report::parse_citations(s));
        CHECK(p.malformed >= 1);
    }
}

TEST_CASE("similarity examples") {
    CHECK(report::similarity("120", "120") == 1.0);
    CHECK(report::similarity("", "") == 1.0);
    CHECK(report::similarity("abc", "") == 0.0);
    CHECK(report::similarity("  Deluxe   KING ", "deluxe king") == 1.0);
    CHECK(report::similarity("450g small cap", "450g small capacity") == doctest::Approx(1.0 - 5.0 / 19.0));
    CHECK(report::similarity("450g small cap", "450g small capacity") < kCitationThreshold);
    // Code points, not bytes.
    CHECK(report::similarity("\xE4\xBB\xB7\xE6\xA0\xBC", "\xE4\xBB\xB7") == doctest::Approx(0.5));
}

TEST_CASE("grounding picks the exact match and rejects the near miss") {
    const auto r = record(1, {"120", "shipping"});
    auto c = report::ground_citation({1, "120", {}, 0.0}, *r);
    REQUIRE(c.resolved);
    CHECK(c.resolved->element_index == 0);
    CHECK(c.resolved->similarity == 1.0);
    CHECK(c.resolved->bbox == r->grounding.elements[0].bbox);

    const auto r2 = record(2, {"450g small capacity"});
    const auto miss = report::ground_citation({2, "450g small cap", {}, 0.0}, *r2);
    CHECK_FALSE(miss.resolved);
    CHECK(miss.best_similarity == doctest::Approx(0.7368).epsilon(1e-3));

    CHECK_THROWS_AS(report::ground_citation({3, "x", {}, 0.0}, *r2), PreconditionError);
}

TEST_CASE("ties go to the lower element index") {
    const auto r = record(1, {"abcd", "abce", "abcd"});
    const auto c = report::ground_citation({1, "abcd", {}, 0.0}, *r);
    REQUIRE(c.resolved);
    CHECK(c.resolved->element_index == 0);
    const auto d = report::ground_citation({1, "abcf", {}, 0.0}, *r, 0.7);
    REQUIRE(d.resolved);
    CHECK(d.resolved->element_index == 0);
}

TEST_CASE("grounding agrees with a brute-force oracle") {
    std::mt19937 rng(7);
    int resolved = 0, pairs = 0;
    for (int round = 0; round < 250; ++round) {
        std::vector<std::string> texts;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) texts.push_back(random_word(rng, 1, 9));
        std::string quote = texts[rng() % texts.size()];
        // Perturb the quote a little so scores vary around the threshold.
        const int edits = static_cast<int>(rng() % 3);
        for (int e = 0; e < edits && !quote.empty(); ++e) quote[rng() % quote.size()] = static_cast<char>('a' + rng() % 5);
        if (rng() % 4 == 0) quote += random_word(rng, 1, 2);

        double best = -1.0;
        int best_i = -1;
        for (int i = 0; i < n; ++i) {
            const double s = oracle_similarity(quote, texts[static_cast<std::size_t>(i)]);
            CHECK(report::similarity(quote, texts[static_cast<std::size_t>(i)]) == doctest::Approx(s));
            if (s > best) {
                best = s;
                best_i = i;
            }
        }
        const auto r = record(1, texts);
        const auto c = report::ground_citation({1, quote, {}, 0.0}, *r);
        ++pairs;
        CHECK(c.best_similarity == doctest::Approx(best));
        if (best >= kCitationThreshold) {
            REQUIRE(c.resolved);
            CHECK(c.resolved->element_index == best_i);
            ++resolved;
        } else {
            CHECK_FALSE(c.resolved);
        }
    }
    CHECK(pairs >= 200);
    CHECK(resolved > 20);
    CHECK(resolved < pairs);
}

TEST_CASE("raising the threshold never resolves more") {
    std::mt19937 rng(11);
    const std::vector<double> thresholds{0.6, 0.8, 0.95};
    for (int round = 0; round < 100; ++round) {
        std::vector<std::string> texts{random_word(rng, 3, 8), random_word(rng, 3, 8)};
        const auto r = record(1, texts);
        const auto quote = random_word(rng, 3, 8);
        bool prev = true;
        for (double t : thresholds) {
            const bool now = report::ground_citation({1, quote, {}, 0.0}, *r, t).resolved.has_value();
            CHECK((prev || !now));
            prev = now;
        }
    }
}

TEST_CASE("assemble rewrites citations as links") {
    const std::vector<std::shared_ptr<const EvidenceRecord>> recs{record(1, {"120", "shipping"}),
                                                                  record(2, {"450g small capacity"})};
    const std::string raw = "- price 120 yuan[1(120)]\n- weight 450g[2(450g small cap)]\n- both [[1(shipping)][2(450g small capacity)]]\n";
    const auto b = report::assemble("t", recs, raw);
    CHECK(b.markdown ==
          "- price 120 yuan[src 1](evidence/1.png#e0)\n"
          "- weight 450g[src 2](evidence/2.png)<sup>\xE2\x80\xA0</sup>\n"
          "- both [src 1](evidence/1.png#e1) [src 2](evidence/2.png#e0)\n");
    CHECK(b.citations.size() == 4);
    CHECK(b.unresolved_count == 1);
    CHECK(b.format == ReportFormat::narrative);
    CHECK(b.evidence_ids == std::vector<int>{1, 2});
    REQUIRE(b.highlights.at(1).size() == 2);
    CHECK(b.highlights.at(2).size() == 1);
    CHECK(b.highlights.at(1)[1].citation == 2);

    // The rewritten text holds no raw citations.
    const auto again = report::parse_citations(b.markdown);
    CHECK(again.citations.empty());
    CHECK(again.malformed == 0);

    const auto hj = highlights_json(b, 1);
    CHECK(hj["rects"].size() == 2);
    CHECK(hj["rects"][0]["bbox"] == nlohmann::json{60, 100, 900, 200});
    CHECK(highlights_json(b, 5)["rects"].empty());
}

TEST_CASE("malformed citations count as unresolved and stay in the text") {
    const std::vector<std::shared_ptr<const EvidenceRecord>> recs{record(1, {"120"})};
    const auto b = report::assemble("t", recs, "a[1(120)] b[1(");
    CHECK(b.unresolved_count == 1);
    CHECK(b.markdown.ends_with("b[1("));
}

TEST_CASE("citation of an unknown id is an invariant error naming it") {
    const std::vector<std::shared_ptr<const EvidenceRecord>> recs{record(1, {"120"})};
    try {
        report::assemble("t", recs, "x[99(120)]");
        FAIL("expected an error");
    } catch (const InvariantError& e) {
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("classify") {
    CHECK(report::classify("| a | b |\n|---|---|\n| 1 | 2 |\n") == ReportFormat::tabular);
    CHECK(report::classify("|:---:|---|\n") == ReportFormat::tabular);
    CHECK(report::classify("- one\n- two\n") == ReportFormat::narrative);
    CHECK(report::classify("a | b but no delimiter\n") == ReportFormat::narrative);
    CHECK(report::classify("---\n") == ReportFormat::narrative);
}

TEST_CASE("report prompt") {
    const std::vector<std::shared_ptr<const EvidenceRecord>> recs{record(1, {"120"}), record(2, {"shipping"})};
    const auto req = report::build_prompt("Compare things", recs);
    CHECK(req.role == LlmRole::reporter);
    CHECK(req.user_prompt.find("interface id: 1\n" + recs[0]->description) != std::string::npos);
    CHECK(req.user_prompt.find("interface id: 2\n" + recs[1]->description) != std::string::npos);
    CHECK(req.system_prompt.find("[[1(xxx)][2(yyy)]]") != std::string::npos);
    CHECK(req.system_prompt.find("[x(interface original content)]") != std::string::npos);
    CHECK(req.system_prompt.find("price 120 yuan[1(120)]") != std::string::npos);
    CHECK_THROWS_AS(report::build_prompt("t", {}), PreconditionError);
}

TEST_CASE("hotel bundle and report prompt are frozen") {
    auto r = drt::run(drt::kHotel.stem, drt::kHotel.task);
    REQUIRE(r.report);
    CHECK(drt::golden_diff("reports/hotel_bundle.json", to_json(*r.report).dump(2) + "\n") == "");

    auto sc = drt::scenario(drt::kHotel.stem);
    Orchestrator orch(sc, scripted_gateway(*sc), {});
    orch.run(drt::kHotel.task);
    const auto req = report::build_prompt(drt::kHotel.task, orch.evidence()->all());
    CHECK(drt::golden_diff("prompts/reporter_hotel.txt",
                           "SYSTEM\n" + req.system_prompt + "\nUSER\n" + req.user_prompt + "\n") == "");

    for (const auto& c : r.report->citations) {
        REQUIRE(c.resolved);
        const auto rec = orch.evidence()->get(c.evidence_id);
        REQUIRE(rec);
        CHECK(c.resolved->bbox.inside({0, 0, rec->long_image.width(), rec->long_image.height()}));
    }
}

TEST_CASE("write_bundle writes the report and sidecars") {
    const std::vector<std::shared_ptr<const EvidenceRecord>> recs{record(1, {"120"}), record(2, {"x"})};
    const auto b = report::assemble("t", recs, "p[1(120)]");
    const auto dir = drt::temp_dir("bundle");
    report::write_bundle(b, dir);
    CHECK(drt::read_file(dir / "report.md") == b.markdown + "\n");
    const auto h1 = nlohmann::json::parse(drt::read_file(dir / "evidence" / "1.highlights"));
    CHECK(h1["rects"].size() == 1);
    const auto h2 = nlohmann::json::parse(drt::read_file(dir / "evidence" / "2.highlights"));
    CHECK(h2["rects"].empty());
}
