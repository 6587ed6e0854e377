// Predicts with a tree ensemble file: headerless CSV rows on stdin, one
// prediction per line on stdout. Speaks the external-model protocol.
#include <cstdio>
#include <iostream>

#include "moc/csv.hpp"
#include "moc/forest.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: moc-forest <forest.json>\n";
        return 1;
    }
    try {
        const auto forest = moc::Forest::from_json(moc::read_json_file(argv[1]));
        const auto& schema = forest.schema();
        std::vector<moc::DataPoint> batch;
        for (const auto& rec : moc::csv::read_all(std::cin)) {
            if (rec.size() != schema.size()) {
                std::cerr << "moc-forest: expected " << schema.size() << " cells, got " << rec.size() << "\n";
                return 1;
            }
            moc::DataPoint x{std::vector<double>(schema.size())};
            for (std::size_t j = 0; j < schema.size(); ++j) x[j] = schema.parse_value(j, rec[j]);
            batch.push_back(std::move(x));
        }
        for (double p : forest.predict_batch(batch)) {
            std::printf("%.17g\n", p);
        }
    } catch (const std::exception& e) {
        std::cerr << "moc-forest: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
