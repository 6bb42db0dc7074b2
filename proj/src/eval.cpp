#include "scene2prompt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

using nlohmann::json;

// --- Porter stemmer ------------------------------------------------------
// Faithful port of the reference implementation, including the bli/logi
// departures.
class Porter {
public:
    std::string stem(const std::string& word) {
        b = word;
        k = int(b.size()) - 1;
        if (k <= 1) {
            return b;
        }
        step1ab();
        step1c();
        step2();
        step3();
        step4();
        step5();
        return b.substr(0, k + 1);
    }

private:
    std::string b;
    int k = 0;
    int j = 0;

    bool cons(int i) const {
        switch (b[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u':
                return false;
            case 'y':
                return i == 0 ? true : !cons(i - 1);
            default:
                return true;
        }
    }

    // number of consonant-vowel sequences in [0, j]
    int m() const {
        int n = 0;
        int i = 0;
        while (true) {
            if (i > j) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j; ++i) {
            if (!cons(i)) return true;
        }
        return false;
    }

    bool double_cons(int i) const {
        return i >= 1 && b[i] == b[i - 1] && cons(i);
    }

    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        const char ch = b[i];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(const char* s) {
        const int len = int(std::strlen(s));
        if (len > k + 1 || b.compare(k - len + 1, len, s) != 0) return false;
        j = k - len;
        return true;
    }

    void set_to(const char* s) {
        b = b.substr(0, j + 1) + s;
        k = int(b.size()) - 1;
    }

    void replace_if_m(const char* s) {
        if (m() > 0) set_to(s);
    }

    void step1ab() {
        if (b[k] == 's') {
            if (ends("sses")) k -= 2;
            else if (ends("ies")) set_to("i");
            else if (b[k - 1] != 's') --k;
        }
        if (ends("eed")) {
            if (m() > 0) --k;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k = j;
            if (ends("at")) set_to("ate");
            else if (ends("bl")) set_to("ble");
            else if (ends("iz")) set_to("ize");
            else if (double_cons(k)) {
                --k;
                const char ch = b[k];
                if (ch == 'l' || ch == 's' || ch == 'z') ++k;
            } else if (m() == 1 && cvc(k)) {
                set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b[k] = 'i';
    }

    void step2() {
        if (k < 1) return;
        switch (b[k - 1]) {
            case 'a':
                if (ends("ational")) { replace_if_m("ate"); break; }
                if (ends("tional")) { replace_if_m("tion"); break; }
                break;
            case 'c':
                if (ends("enci")) { replace_if_m("ence"); break; }
                if (ends("anci")) { replace_if_m("ance"); break; }
                break;
            case 'e':
                if (ends("izer")) { replace_if_m("ize"); break; }
                break;
            case 'l':
                if (ends("bli")) { replace_if_m("ble"); break; }
                if (ends("alli")) { replace_if_m("al"); break; }
                if (ends("entli")) { replace_if_m("ent"); break; }
                if (ends("eli")) { replace_if_m("e"); break; }
                if (ends("ousli")) { replace_if_m("ous"); break; }
                break;
            case 'o':
                if (ends("ization")) { replace_if_m("ize"); break; }
                if (ends("ation")) { replace_if_m("ate"); break; }
                if (ends("ator")) { replace_if_m("ate"); break; }
                break;
            case 's':
                if (ends("alism")) { replace_if_m("al"); break; }
                if (ends("iveness")) { replace_if_m("ive"); break; }
                if (ends("fulness")) { replace_if_m("ful"); break; }
                if (ends("ousness")) { replace_if_m("ous"); break; }
                break;
            case 't':
                if (ends("aliti")) { replace_if_m("al"); break; }
                if (ends("iviti")) { replace_if_m("ive"); break; }
                if (ends("biliti")) { replace_if_m("ble"); break; }
                break;
            case 'g':
                if (ends("logi")) { replace_if_m("log"); break; }
                break;
        }
    }

    void step3() {
        switch (b[k]) {
            case 'e':
                if (ends("icate")) { replace_if_m("ic"); break; }
                if (ends("ative")) { replace_if_m(""); break; }
                if (ends("alize")) { replace_if_m("al"); break; }
                break;
            case 'i':
                if (ends("iciti")) { replace_if_m("ic"); break; }
                break;
            case 'l':
                if (ends("ical")) { replace_if_m("ic"); break; }
                if (ends("ful")) { replace_if_m(""); break; }
                break;
            case 's':
                if (ends("ness")) { replace_if_m(""); break; }
                break;
        }
    }

    void step4() {
        if (k < 1) return;
        switch (b[k - 1]) {
            case 'a': if (ends("al")) break; return;
            case 'c': if (ends("ance") || ends("ence")) break; return;
            case 'e': if (ends("er")) break; return;
            case 'i': if (ends("ic")) break; return;
            case 'l': if (ends("able") || ends("ible")) break; return;
            case 'n':
                if (ends("ant") || ends("ement") || ends("ment") || ends("ent")) break;
                return;
            case 'o':
                if (ends("ion") && j >= 0 && (b[j] == 's' || b[j] == 't')) break;
                if (ends("ou")) break;
                return;
            case 's': if (ends("ism")) break; return;
            case 't': if (ends("ate") || ends("iti")) break; return;
            case 'u': if (ends("ous")) break; return;
            case 'v': if (ends("ive")) break; return;
            case 'z': if (ends("ize")) break; return;
            default: return;
        }
        if (m() > 1) k = j;
    }

    void step5() {
        j = k;
        if (b[k] == 'e') {
            const int a = m();
            if (a > 1 || (a == 1 && !cvc(k - 1))) --k;
        }
        if (b[k] == 'l' && double_cons(k) && m() > 1) --k;
    }
};

std::vector<std::string> ngram_keys(const std::vector<std::string>& tokens, int n) {
    std::vector<std::string> keys;
    if (int(tokens.size()) < n) {
        return keys;
    }
    keys.reserve(tokens.size() - n + 1);
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int j = 1; j < n; ++j) {
            key += '\x1f';
            key += tokens[i + j];
        }
        keys.push_back(std::move(key));
    }
    return keys;
}

std::unordered_map<std::string, double> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
    std::unordered_map<std::string, double> counts;
    for (auto& key : ngram_keys(tokens, n)) {
        counts[key] += 1.0;
    }
    return counts;
}

}  // namespace

std::string question_type_name(QuestionType t) {
    switch (t) {
        case QuestionType::What: return "What";
        case QuestionType::Is: return "Is";
        case QuestionType::How: return "How";
        case QuestionType::Can: return "Can";
        case QuestionType::Which: return "Which";
        case QuestionType::Other: return "Other";
    }
    return "Other";
}

QuestionType question_type(const std::string& question) {
    const auto tokens = split_ws(question);
    if (tokens.empty()) {
        throw std::invalid_argument("question must be nonempty");
    }
    const std::string head = to_lower(tokens.front());
    if (head == "what") return QuestionType::What;
    if (head == "is") return QuestionType::Is;
    if (head == "how") return QuestionType::How;
    if (head == "can") return QuestionType::Can;
    if (head == "which") return QuestionType::Which;
    return QuestionType::Other;
}

std::string normalize_answer(const std::string& s) {
    std::string no_punct;
    no_punct.reserve(s.size());
    for (char c : to_lower(s)) {
        if (!std::ispunct(static_cast<unsigned char>(c))) {
            no_punct.push_back(c);
        }
    }
    std::string out;
    for (const auto& word : split_ws(no_punct)) {
        if (word == "a" || word == "an" || word == "the") {
            continue;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += word;
    }
    return out;
}

int em_at_1(const QaRecord& record) {
    if (record.references.empty()) {
        throw std::invalid_argument("record needs at least one reference");
    }
    const std::string pred = normalize_answer(record.prediction);
    for (const auto& ref : record.references) {
        if (pred == normalize_answer(ref)) {
            return 1;
        }
    }
    return 0;
}

std::string porter_stem(const std::string& word) {
    return Porter{}.stem(word);
}

std::vector<std::string> caption_tokens(const std::string& s) {
    std::string no_punct;
    no_punct.reserve(s.size());
    for (char c : to_lower(s)) {
        if (!std::ispunct(static_cast<unsigned char>(c))) {
            no_punct.push_back(c);
        }
    }
    return split_ws(no_punct);
}

double bleu(const QaRecord& record, int n) {
    if (n < 1 || n > 4) {
        throw std::invalid_argument("bleu order must be in 1..4");
    }
    const auto cand = caption_tokens(record.prediction);
    const double c = double(cand.size());
    if (cand.empty()) {
        return 0.0;
    }
    std::vector<std::vector<std::string>> refs;
    refs.reserve(record.references.size());
    for (const auto& r : record.references) {
        refs.push_back(caption_tokens(r));
    }

    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        const auto cand_counts = ngram_counts(cand, k);
        double clipped = 0.0;
        double total = 0.0;
        for (const auto& [key, count] : cand_counts) {
            total += count;
            double max_ref = 0.0;
            for (const auto& ref : refs) {
                const auto rc = ngram_counts(ref, k);
                const auto it = rc.find(key);
                if (it != rc.end()) {
                    max_ref = std::max(max_ref, it->second);
                }
            }
            clipped += std::min(count, max_ref);
        }
        const double p = (total > 0.0 && clipped > 0.0) ? clipped / total : 1.0 / (2.0 * c);
        log_sum += std::log(p);
    }
    const double geo_mean = std::exp(log_sum / double(n));

    // brevity penalty against the closest-length reference, shorter on ties
    double r = double(refs.front().size());
    for (const auto& ref : refs) {
        const double len = double(ref.size());
        if (std::abs(len - c) < std::abs(r - c) ||
            (std::abs(len - c) == std::abs(r - c) && len < r)) {
            r = len;
        }
    }
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * geo_mean;
}

double rouge_l(const QaRecord& record) {
    const auto cand = caption_tokens(record.prediction);
    if (cand.empty()) {
        return 0.0;
    }
    constexpr double beta = 1.2;
    double best = 0.0;
    for (const auto& reference : record.references) {
        const auto ref = caption_tokens(reference);
        if (ref.empty()) {
            continue;
        }
        const std::size_t nc = cand.size();
        const std::size_t nr = ref.size();
        std::vector<std::vector<int>> lcs(nc + 1, std::vector<int>(nr + 1, 0));
        for (std::size_t i = 1; i <= nc; ++i) {
            for (std::size_t j = 1; j <= nr; ++j) {
                lcs[i][j] = cand[i - 1] == ref[j - 1]
                                ? lcs[i - 1][j - 1] + 1
                                : std::max(lcs[i - 1][j], lcs[i][j - 1]);
            }
        }
        const double l = double(lcs[nc][nr]);
        if (l == 0.0) {
            continue;
        }
        const double p = l / double(nc);
        const double rr = l / double(nr);
        const double f = (1.0 + beta * beta) * p * rr / (rr + beta * beta * p);
        best = std::max(best, f);
    }
    return best;
}

double meteor_lite(const QaRecord& record) {
    const auto cand = caption_tokens(record.prediction);
    if (cand.empty()) {
        return 0.0;
    }
    double best = 0.0;
    for (const auto& reference : record.references) {
        const auto ref = caption_tokens(reference);
        if (ref.empty()) {
            continue;
        }
        std::vector<int> cand_match(cand.size(), -1);
        std::vector<bool> ref_used(ref.size(), false);
        // stage 1: exact, earliest unmatched reference token
        for (std::size_t ci = 0; ci < cand.size(); ++ci) {
            for (std::size_t ri = 0; ri < ref.size(); ++ri) {
                if (!ref_used[ri] && cand[ci] == ref[ri]) {
                    cand_match[ci] = int(ri);
                    ref_used[ri] = true;
                    break;
                }
            }
        }
        // stage 2: Porter-stemmed on leftovers
        for (std::size_t ci = 0; ci < cand.size(); ++ci) {
            if (cand_match[ci] >= 0) {
                continue;
            }
            const std::string cs = porter_stem(cand[ci]);
            for (std::size_t ri = 0; ri < ref.size(); ++ri) {
                if (!ref_used[ri] && cs == porter_stem(ref[ri])) {
                    cand_match[ci] = int(ri);
                    ref_used[ri] = true;
                    break;
                }
            }
        }
        int matches = 0;
        int chunks = 0;
        int prev_ref = -2;
        for (std::size_t ci = 0; ci < cand.size(); ++ci) {
            if (cand_match[ci] < 0) {
                prev_ref = -2;
                continue;
            }
            ++matches;
            if (cand_match[ci] != prev_ref + 1) {
                ++chunks;
            }
            prev_ref = cand_match[ci];
        }
        if (matches == 0) {
            continue;
        }
        const double p = double(matches) / double(cand.size());
        const double r = double(matches) / double(ref.size());
        const double f_mean = 10.0 * p * r / (r + 9.0 * p);
        const double frag = double(chunks) / double(matches);
        const double penalty = 0.5 * frag * frag * frag;
        best = std::max(best, f_mean * (1.0 - penalty));
    }
    return best;
}

CiderResult cider_d(const std::vector<QaRecord>& records) {
    CiderResult result;
    const std::size_t n_docs = records.size();
    if (n_docs == 0) {
        return result;
    }
    result.degenerate_idf = n_docs < 2;

    // document frequency over each record's reference set
    std::unordered_map<std::string, double> df;
    for (const auto& rec : records) {
        std::unordered_set<std::string> seen;
        for (const auto& ref : rec.references) {
            const auto tokens = caption_tokens(ref);
            for (int n = 1; n <= 4; ++n) {
                for (auto& key : ngram_keys(tokens, n)) {
                    seen.insert(std::to_string(n) + ':' + key);
                }
            }
        }
        for (const auto& key : seen) {
            df[key] += 1.0;
        }
    }
    const double log_corpus = std::log(double(n_docs));

    struct Vec {
        std::array<std::unordered_map<std::string, double>, 4> weights;
        std::array<double, 4> norm{};
        double length = 0.0;  // bigram total, as in the reference scorer
    };
    auto to_vec = [&](const std::vector<std::string>& tokens) {
        Vec v;
        for (int n = 1; n <= 4; ++n) {
            for (const auto& [key, tf] : ngram_counts(tokens, n)) {
                const auto it = df.find(std::to_string(n) + ':' + key);
                const double doc_freq = it == df.end() ? 0.0 : it->second;
                const double idf = log_corpus - std::log(std::max(1.0, doc_freq));
                const double w = tf * idf;
                v.weights[n - 1][key] = w;
                v.norm[n - 1] += w * w;
                if (n == 2) {
                    v.length += tf;
                }
            }
            v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
        }
        return v;
    };

    constexpr double sigma = 6.0;
    result.per_record.reserve(n_docs);
    double total = 0.0;
    for (const auto& rec : records) {
        const Vec hyp = to_vec(caption_tokens(rec.prediction));
        std::array<double, 4> score{};
        for (const auto& reference : rec.references) {
            const Vec ref = to_vec(caption_tokens(reference));
            const double delta = hyp.length - ref.length;
            const double len_penalty = std::exp(-delta * delta / (2.0 * sigma * sigma));
            for (int n = 0; n < 4; ++n) {
                double dot = 0.0;
                for (const auto& [key, wh] : hyp.weights[n]) {
                    const auto it = ref.weights[n].find(key);
                    if (it != ref.weights[n].end()) {
                        dot += std::min(wh, it->second) * it->second;
                    }
                }
                if (hyp.norm[n] > 0.0 && ref.norm[n] > 0.0) {
                    dot /= hyp.norm[n] * ref.norm[n];
                } else {
                    dot = 0.0;
                }
                score[n] += dot * len_penalty;
            }
        }
        double mean_n = 0.0;
        for (int n = 0; n < 4; ++n) {
            mean_n += score[n];
        }
        mean_n /= 4.0;
        const double record_score = mean_n / double(rec.references.size()) * 10.0;
        result.per_record.push_back(record_score);
        total += record_score;
    }
    result.mean = total / double(n_docs);
    return result;
}

MetricReport evaluate_run(const std::vector<QaRecord>& records) {
    if (records.empty()) {
        throw std::invalid_argument("no records to evaluate");
    }
    MetricReport report;
    report.count = int(records.size());

    std::map<QuestionType, int> type_hits;
    int hits = 0;
    double b1 = 0.0, b4 = 0.0, rl = 0.0, mt = 0.0;
    for (const auto& rec : records) {
        const int em = em_at_1(rec);
        hits += em;
        const QuestionType t = question_type(rec.question);
        report.per_type[t].count += 1;
        type_hits[t] += em;
        b1 += bleu(rec, 1);
        b4 += bleu(rec, 4);
        rl += rouge_l(rec);
        mt += meteor_lite(rec);
    }
    const double n = double(records.size());
    report.em_overall = double(hits) / n;
    for (auto& [t, breakdown] : report.per_type) {
        breakdown.em = double(type_hits[t]) / double(breakdown.count);
    }
    report.bleu1 = b1 / n;
    report.bleu4 = b4 / n;
    report.rouge_l = rl / n;
    report.meteor = mt / n;
    const CiderResult cider = cider_d(records);
    report.cider = cider.mean;
    report.cider_degenerate = cider.degenerate_idf;
    return report;
}

nlohmann::json report_to_json(const MetricReport& report) {
    json doc;
    doc["count"] = report.count;
    doc["em_overall"] = report.em_overall;
    json per_type = json::object();
    for (const auto t : {QuestionType::What, QuestionType::Is, QuestionType::How,
                         QuestionType::Can, QuestionType::Which, QuestionType::Other}) {
        const auto it = report.per_type.find(t);
        per_type[question_type_name(t)] = {
            {"count", it == report.per_type.end() ? 0 : it->second.count},
            {"em", it == report.per_type.end() ? 0.0 : it->second.em},
        };
    }
    doc["per_type"] = per_type;
    doc["bleu1"] = report.bleu1;
    doc["bleu4"] = report.bleu4;
    doc["rouge_l"] = report.rouge_l;
    doc["meteor"] = report.meteor;
    doc["cider"] = report.cider;
    doc["cider_degenerate_idf"] = report.cider_degenerate;
    return doc;
}

std::string report_to_table(const MetricReport& report) {
    std::ostringstream out;
    char buf[256];
    out << "           What     Is    How    Can  Which  Other  Overall\n";
    std::string em_row = "EM@1   ";
    std::string count_row = "count  ";
    for (const auto t : {QuestionType::What, QuestionType::Is, QuestionType::How,
                         QuestionType::Can, QuestionType::Which, QuestionType::Other}) {
        const auto it = report.per_type.find(t);
        const double em = it == report.per_type.end() ? 0.0 : it->second.em;
        const int count = it == report.per_type.end() ? 0 : it->second.count;
        std::snprintf(buf, sizeof(buf), "%7.3f", em);
        em_row += buf;
        std::snprintf(buf, sizeof(buf), "%7d", count);
        count_row += buf;
    }
    std::snprintf(buf, sizeof(buf), "%9.3f", report.em_overall);
    em_row += buf;
    std::snprintf(buf, sizeof(buf), "%9d", report.count);
    count_row += buf;
    out << em_row << "\n" << count_row << "\n\n";
    std::snprintf(buf, sizeof(buf),
                  "BLEU-1 %.4f  BLEU-4 %.4f  ROUGE-L %.4f  METEOR %.4f  CIDEr %.4f%s\n",
                  report.bleu1, report.bleu4, report.rouge_l, report.meteor, report.cider,
                  report.cider_degenerate ? " (degenerate IDF: single-record corpus)" : "");
    out << buf;
    out << "\nReference full-scale headlines: SQA3D EM@1 62.1, ScanQA CIDEr 89.0; "
           "desk-scale runs are not comparable.\n";
    return out.str();
}

std::vector<QaRecord> load_qa_jsonl(const std::string& text) {
    std::vector<QaRecord> records;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            throw std::runtime_error("bad JSONL at line " + std::to_string(line_no));
        }
        QaRecord rec;
        rec.scene_id = doc.value("scene_id", "");
        rec.question = doc.at("question").get<std::string>();
        for (const auto& r : doc.at("references")) {
            rec.references.push_back(r.get<std::string>());
        }
        if (rec.references.empty()) {
            throw std::runtime_error("record at line " + std::to_string(line_no) +
                                     " has no references");
        }
        rec.prediction = doc.value("prediction", "");
        records.push_back(std::move(rec));
    }
    return records;
}

std::string qa_to_jsonl(const std::vector<QaRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        json doc;
        doc["scene_id"] = rec.scene_id;
        doc["question"] = rec.question;
        doc["references"] = rec.references;
        doc["prediction"] = rec.prediction;
        out += doc.dump() + "\n";
    }
    return out;
}

}  // namespace s2p
