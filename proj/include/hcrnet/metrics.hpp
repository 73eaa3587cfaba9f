#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hcr {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;    // true samples of this class
    std::size_t predicted = 0;  // samples predicted as this class
};

/// Accuracy, per-class and macro-averaged precision/recall/F1, and the
/// confusion matrix (rows = true class, columns = predicted class).
///
/// A class never predicted has precision 0; a class with no true samples has
/// recall 0. Macro averages run over the classes that occur in either the
/// truth or the predictions.
struct Metrics {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::size_t total = 0;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<std::size_t>> confusion;
};

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes);

void write_confusion_csv(const std::filesystem::path& path, const Metrics& m,
                         const std::vector<std::string>& class_names);
void write_per_class_csv(const std::filesystem::path& path, const Metrics& m,
                         const std::vector<std::string>& class_names);

}  // namespace hcr
