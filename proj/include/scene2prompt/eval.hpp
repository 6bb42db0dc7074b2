#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace s2p {

struct QaRecord {
    std::string scene_id;
    std::string question;
    std::vector<std::string> references;  // >= 1
    std::string prediction;
};

enum class QuestionType { What, Is, How, Can, Which, Other };

std::string question_type_name(QuestionType t);

/// Leading-word bucket: case-insensitive match of the first whitespace
/// token against What/Is/How/Can/Which, everything else is Other.
QuestionType question_type(const std::string& question);

/// Lowercase, strip punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_answer(const std::string& s);

/// 1 iff the normalized prediction equals any normalized reference.
int em_at_1(const QaRecord& record);

/// Classic Porter stemmer; input is expected lowercase.
std::string porter_stem(const std::string& word);

/// Metric tokenization: lowercase, punctuation stripped, whitespace split.
std::vector<std::string> caption_tokens(const std::string& s);

/// Sentence-level BLEU-n: modified n-gram precision clipped against all
/// references, geometric mean over orders 1..n, brevity penalty against
/// the closest-length reference. Zero-count precisions are smoothed to
/// 1/(2 * candidate_length). Empty candidates score 0.
double bleu(const QaRecord& record, int n);

/// LCS F-measure with beta = 1.2, max over references.
double rouge_l(const QaRecord& record);

/// Unigram alignment in two stages (exact, then Porter-stemmed),
/// F_mean = 10PR/(R+9P), fragmentation penalty 0.5*(chunks/matches)^3,
/// max over references. No synonym stage.
double meteor_lite(const QaRecord& record);

struct CiderResult {
    std::vector<double> per_record;  // in [0, 10]
    double mean = 0.0;
    bool degenerate_idf = false;  // singleton corpus
};

/// CIDEr-D over the record corpus: TF-IDF n-gram vectors (n = 1..4) with
/// IDF from the reference corpus, clipped cosine per reference, gaussian
/// length penalty (sigma = 6), averaged over orders and scaled by 10.
CiderResult cider_d(const std::vector<QaRecord>& records);

struct TypeBreakdown {
    int count = 0;
    double em = 0.0;
};

struct MetricReport {
    int count = 0;
    double em_overall = 0.0;
    std::map<QuestionType, TypeBreakdown> per_type;
    double bleu1 = 0.0;
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
    double cider = 0.0;
    bool cider_degenerate = false;
};

MetricReport evaluate_run(const std::vector<QaRecord>& records);

nlohmann::json report_to_json(const MetricReport& report);

/// Aligned text table: question breakdown columns then overall EM, then
/// the caption metrics, with a reference footer for full-scale systems.
std::string report_to_table(const MetricReport& report);

std::vector<QaRecord> load_qa_jsonl(const std::string& text);
std::string qa_to_jsonl(const std::vector<QaRecord>& records);

}  // namespace s2p
