#include "hcrnet/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "hcrnet/error.hpp"

namespace hcr {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes) {
    if (truth.empty()) throw DataError("cannot compute metrics on an empty set");
    if (truth.size() != predicted.size()) throw DataError("truth and prediction lengths differ");
    Metrics m;
    m.total = truth.size();
    m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes || static_cast<std::size_t>(p) >= num_classes) {
            throw DataError("class index out of range in metrics");
        }
        ++m.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        if (t == p) ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);

    m.per_class.resize(num_classes);
    std::size_t present = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& cm = m.per_class[c];
        const std::size_t tp = m.confusion[c][c];
        for (std::size_t k = 0; k < num_classes; ++k) {
            cm.support += m.confusion[c][k];
            cm.predicted += m.confusion[k][c];
        }
        cm.precision = cm.predicted ? static_cast<double>(tp) / static_cast<double>(cm.predicted) : 0.0;
        cm.recall = cm.support ? static_cast<double>(tp) / static_cast<double>(cm.support) : 0.0;
        cm.f1 = cm.precision + cm.recall > 0 ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
        if (cm.support || cm.predicted) {
            ++present;
            m.macro_precision += cm.precision;
            m.macro_recall += cm.recall;
            m.macro_f1 += cm.f1;
        }
    }
    m.macro_precision /= static_cast<double>(present);
    m.macro_recall /= static_cast<double>(present);
    m.macro_f1 /= static_cast<double>(present);
    return m;
}

void write_confusion_csv(const std::filesystem::path& path, const Metrics& m,
                         const std::vector<std::string>& class_names) {
    auto out = open_for_write(path);
    out << "true\\predicted";
    for (std::size_t c = 0; c < m.confusion.size(); ++c) out << ',' << csv_field(class_names.at(c));
    out << '\n';
    for (std::size_t r = 0; r < m.confusion.size(); ++r) {
        out << csv_field(class_names.at(r));
        for (auto v : m.confusion[r]) out << ',' << v;
        out << '\n';
    }
}

void write_per_class_csv(const std::filesystem::path& path, const Metrics& m,
                         const std::vector<std::string>& class_names) {
    auto out = open_for_write(path);
    out << "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < m.per_class.size(); ++c) {
        const auto& cm = m.per_class[c];
        out << csv_field(class_names.at(c)) << ',' << fmt_double(cm.precision) << ',' << fmt_double(cm.recall) << ','
            << fmt_double(cm.f1) << ',' << cm.support << '\n';
    }
}

}  // namespace hcr
