#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracle_metrics.hpp"
#include "scene2prompt/eval.hpp"

using namespace s2p;
using namespace s2p::testing;

namespace {

QaRecord rec(const std::string& question, std::vector<std::string> refs,
             const std::string& pred) {
    return {"scene", question, std::move(refs), pred};
}

std::vector<QaRecord> hand_scored_fixture() {
    return {
        rec("What color is the desk?", {"brown"}, "Brown."),                    // 1
        rec("What is on the table?", {"laptop", "computer"}, "the laptop"),     // 1
        rec("What shape is the rug?", {"round"}, "square"),                     // 0
        rec("What direction is the door?", {"3 o'clock"}, "3 o'clock"),         // 1
        rec("Is the door open?", {"yes"}, "yes"),                               // 1
        rec("Is there a window?", {"no"}, "yes"),                               // 0
        rec("Is the lamp on the desk?", {"yes"}, "Yes!"),                       // 1
        rec("How many chairs are there?", {"two", "2"}, "2"),                   // 1
        rec("How big is the bed?", {"large"}, "larger"),                        // 0
        rec("How many windows are there?", {"one"}, "one"),                     // 1
        rec("Can I sit on the sofa?", {"yes"}, "yes"),                          // 1
        rec("can you see the tv?", {"no"}, "no"),                               // 1
        rec("Can the door close?", {"yes"}, "maybe"),                           // 0
        rec("Which chair is red?", {"left one"}, "the left one"),               // 1
        rec("Which side is the lamp?", {"right"}, "left"),                      // 0
        rec("Which object is nearest?", {"table"}, "Table"),                    // 1
        rec("Where is the lamp?", {"on desk"}, "on the desk"),                  // 1
        rec("Where is the cat?", {"on bed"}, "under bed"),                      // 0
        rec("Does the room have windows?", {"yes"}, "yes"),                     // 1
        rec("Describe the floor.", {"wooden floor"}, "a wooden floor"),         // 1
    };
}

std::vector<QaRecord> random_records(std::mt19937_64& rng, int count) {
    static const char* pool[] = {"the",  "red",   "chair", "sits",  "near", "a",
                                 "desk", "table", "lamp",  "round", "rug",  "window",
                                 "two",  "doors", "open",  "wooden"};
    std::uniform_int_distribution<int> len(1, 7);
    std::uniform_int_distribution<int> word(0, 15);
    std::uniform_int_distribution<int> nrefs(1, 3);
    auto sentence = [&]() {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            if (i) s += ' ';
            s += pool[word(rng)];
        }
        return s;
    };
    std::vector<QaRecord> out;
    for (int i = 0; i < count; ++i) {
        std::vector<std::string> refs;
        const int r = nrefs(rng);
        for (int j = 0; j < r; ++j) {
            refs.push_back(sentence());
        }
        out.push_back(rec("What is it " + std::to_string(i) + "?", refs, sentence()));
    }
    return out;
}

}  // namespace

TEST_CASE("normalize_answer applies all stated rules") {
    CHECK(normalize_answer("The Brown Chair.") == "brown chair");
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("  3   o'clock ") == "3 oclock");
    CHECK(normalize_answer("AN Apple!") == "apple");
    CHECK(normalize_answer("a an the") == "");
}

TEST_CASE("em_at_1 exact-match semantics") {
    CHECK(em_at_1(rec("What?", {"brown"}, "brown")) == 1);
    CHECK(em_at_1(rec("What?", {"brown"}, "browns")) == 0);
    CHECK(em_at_1(rec("What?", {"table", "desk"}, "the table")) == 1);
    CHECK_THROWS_AS(em_at_1(rec("What?", {}, "x")), std::invalid_argument);
}

TEST_CASE("question_type buckets by leading word") {
    CHECK(question_type("What color is the desk?") == QuestionType::What);
    CHECK(question_type("can I reach it?") == QuestionType::Can);
    CHECK(question_type("Where is the lamp?") == QuestionType::Other);
    CHECK(question_type("WHICH one?") == QuestionType::Which);
    CHECK(question_type("is it?") == QuestionType::Is);
    CHECK(question_type("HOW famous?") == QuestionType::How);
    CHECK_THROWS_AS(question_type("   "), std::invalid_argument);
}

TEST_CASE("porter stemmer fixed points and reductions") {
    CHECK(porter_stem("caresses") == "caress");
    CHECK(porter_stem("ponies") == "poni");
    CHECK(porter_stem("cats") == "cat");
    CHECK(porter_stem("agreed") == "agre");
    CHECK(porter_stem("plastered") == "plaster");
    CHECK(porter_stem("motoring") == "motor");
    CHECK(porter_stem("hopping") == "hop");
    CHECK(porter_stem("falling") == "fall");
    CHECK(porter_stem("happy") == "happi");
    CHECK(porter_stem("relational") == "relat");
    CHECK(porter_stem("conditional") == "condit");
    CHECK(porter_stem("formalize") == "formal");
    CHECK(porter_stem("electrical") == "electr");
    CHECK(porter_stem("hopeful") == "hope");
    CHECK(porter_stem("goodness") == "good");
    CHECK(porter_stem("adjustment") == "adjust");
    CHECK(porter_stem("sky") == "sky");
    CHECK(porter_stem("is") == "is");
}

TEST_CASE("bleu hand-computed cases") {
    // same sentence, long enough for every order to have n-grams
    const auto same = rec("What?", {"the red chair sits near"},
                          "the red chair sits near");
    for (int n = 1; n <= 4; ++n) {
        CHECK(bleu(same, n) == doctest::Approx(1.0).epsilon(1e-12));
    }

    // shorter candidate: p1 = 1, brevity penalty e^(1 - 3/2)
    const auto shorter = rec("What?", {"the cat sat"}, "the cat");
    CHECK(bleu(shorter, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));

    CHECK(bleu(rec("What?", {"anything"}, ""), 1) == 0.0);

    // zero overlap smooths to 1/(2c)
    const auto disjoint = rec("What?", {"alpha beta"}, "gamma delta");
    CHECK(bleu(disjoint, 1) == doctest::Approx(1.0 / 4.0).epsilon(1e-9));
}

TEST_CASE("rouge_l hand-computed cases") {
    CHECK(rouge_l(rec("What?", {"a b c d"}, "a b c d")) == doctest::Approx(1.0));
    // LCS("a b c", "a x c") = 2, P = R = 2/3 -> F = 2/3
    CHECK(rouge_l(rec("What?", {"a x c"}, "a b c")) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(rouge_l(rec("What?", {"p q r"}, "x y z")) == 0.0);
    CHECK(rouge_l(rec("What?", {"anything"}, "")) == 0.0);
}

TEST_CASE("meteor_lite hand-computed cases") {
    // one word, perfectly matched: F = 1, one chunk -> penalty 0.5
    CHECK(meteor_lite(rec("What?", {"brown"}, "brown")) == doctest::Approx(0.5));
    // four words, contiguous: penalty 0.5 * (1/4)^3
    CHECK(meteor_lite(rec("What?", {"the red chair sits"}, "the red chair sits")) ==
          doctest::Approx(1.0 - 0.5 / 64.0).epsilon(1e-12));
    CHECK(meteor_lite(rec("What?", {"alpha"}, "omega")) == 0.0);
    // stemmed stage matches inflected forms
    CHECK(meteor_lite(rec("What?", {"running"}, "runs")) > 0.0);
}

TEST_CASE("cider_d corner cases") {
    // identical prediction in a two-record corpus with disjoint vocab
    std::vector<QaRecord> corpus = {
        rec("What?", {"the red chair sits near the desk"},
            "the red chair sits near the desk"),
        rec("What?", {"two doors stay open tonight always"}, "something else here"),
    };
    const auto result = cider_d(corpus);
    REQUIRE(result.per_record.size() == 2);
    CHECK(result.per_record[0] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK_FALSE(result.degenerate_idf);

    // no shared n-grams scores zero
    CHECK(result.per_record[1] == doctest::Approx(0.0));

    // singleton corpus is flagged degenerate
    const auto singleton = cider_d({corpus[0]});
    CHECK(singleton.degenerate_idf);
}

TEST_CASE("metrics match the independent scalar oracles on random records") {
    std::mt19937_64 rng(321);
    const auto records = random_records(rng, 50);
    for (const auto& r : records) {
        CHECK(bleu(r, 1) == doctest::Approx(oracle_bleu(r, 1)).epsilon(1e-8));
        CHECK(bleu(r, 4) == doctest::Approx(oracle_bleu(r, 4)).epsilon(1e-8));
        CHECK(rouge_l(r) == doctest::Approx(oracle_rouge_l(r)).epsilon(1e-8));
        CHECK(meteor_lite(r) == doctest::Approx(oracle_meteor(r)).epsilon(1e-8));
    }
    const auto ours = cider_d(records);
    const auto oracle = oracle_cider_d(records);
    REQUIRE(ours.per_record.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(ours.per_record[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
    }
}

TEST_CASE("evaluate_run reproduces the hand tally") {
    const auto records = hand_scored_fixture();
    const auto report = evaluate_run(records);
    CHECK(report.count == 20);
    CHECK(report.em_overall == doctest::Approx(14.0 / 20.0));
    CHECK(report.per_type.at(QuestionType::What).count == 4);
    CHECK(report.per_type.at(QuestionType::What).em == doctest::Approx(3.0 / 4.0));
    CHECK(report.per_type.at(QuestionType::Is).count == 3);
    CHECK(report.per_type.at(QuestionType::Is).em == doctest::Approx(2.0 / 3.0));
    CHECK(report.per_type.at(QuestionType::How).count == 3);
    CHECK(report.per_type.at(QuestionType::How).em == doctest::Approx(2.0 / 3.0));
    CHECK(report.per_type.at(QuestionType::Can).count == 3);
    CHECK(report.per_type.at(QuestionType::Can).em == doctest::Approx(2.0 / 3.0));
    CHECK(report.per_type.at(QuestionType::Which).count == 3);
    CHECK(report.per_type.at(QuestionType::Which).em == doctest::Approx(2.0 / 3.0));
    CHECK(report.per_type.at(QuestionType::Other).count == 4);
    CHECK(report.per_type.at(QuestionType::Other).em == doctest::Approx(3.0 / 4.0));

    int total = 0;
    for (const auto& [t, b] : report.per_type) {
        total += b.count;
    }
    CHECK(total == report.count);
}

TEST_CASE("metrics are invariant under record shuffling") {
    std::mt19937_64 rng(7);
    auto records = random_records(rng, 20);
    const auto base = evaluate_run(records);
    std::shuffle(records.begin(), records.end(), rng);
    const auto shuffled = evaluate_run(records);
    CHECK(base.em_overall == doctest::Approx(shuffled.em_overall));
    CHECK(base.bleu1 == doctest::Approx(shuffled.bleu1).epsilon(1e-12));
    CHECK(base.bleu4 == doctest::Approx(shuffled.bleu4).epsilon(1e-12));
    CHECK(base.rouge_l == doctest::Approx(shuffled.rouge_l).epsilon(1e-12));
    CHECK(base.meteor == doctest::Approx(shuffled.meteor).epsilon(1e-12));
    CHECK(base.cider == doctest::Approx(shuffled.cider).epsilon(1e-12));
}

TEST_CASE("identical-prediction corpus maxes out EM and CIDEr") {
    std::vector<QaRecord> records;
    const char* sentences[] = {
        "the red chair sits near the desk",
        "two doors stay open tonight",
        "a wooden table holds the lamp",
        "the round rug lies under a window",
    };
    for (int i = 0; i < 4; ++i) {
        records.push_back(rec("What about " + std::to_string(i) + "?", {sentences[i]},
                              sentences[i]));
    }
    const auto report = evaluate_run(records);
    CHECK(report.em_overall == 1.0);
    CHECK(report.rouge_l == doctest::Approx(1.0));
    CHECK(report.meteor > 0.98);
    CHECK(report.cider == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("report serialization carries the table structure") {
    const auto report = evaluate_run(hand_scored_fixture());
    const auto doc = report_to_json(report);
    CHECK(doc["count"] == 20);
    CHECK(doc["per_type"].size() == 6);
    const auto table = report_to_table(report);
    CHECK(table.find("What") != std::string::npos);
    CHECK(table.find("Overall") != std::string::npos);
    CHECK(table.find("CIDEr") != std::string::npos);
}

TEST_CASE("QA JSONL round-trips") {
    const auto records = hand_scored_fixture();
    const auto text = qa_to_jsonl(records);
    const auto back = load_qa_jsonl(text);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].question == records[i].question);
        CHECK(back[i].references == records[i].references);
        CHECK(back[i].prediction == records[i].prediction);
    }
    CHECK_THROWS(load_qa_jsonl("{not json\n"));
}
