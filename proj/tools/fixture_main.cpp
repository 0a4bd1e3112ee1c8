// Regenerates the bundled synthetic fixture (fixtures/toy).

#include <cstdio>
#include <fstream>
#include <string>

#include "boxkg/synthetic.hpp"

int main(int argc, char** argv) {
    const std::string dir = argc > 1 ? argv[1] : "fixtures/toy";
    const auto planted = boxkg::synthetic::make_planted_dataset(
        /*n_entities=*/50, /*n_relations=*/2, /*n_triples=*/500, /*d=*/8, /*beta=*/0.05,
        /*seed=*/42, /*n_test=*/50);
    boxkg::synthetic::write_dataset_files(planted.dataset, dir);
    std::ofstream rules(dir + "/rules.txt");
    rules << "# relation r0 is treated as transitive in the fixture runs\n";
    rules << "transitive r0\n";
    std::printf("wrote fixture to %s (%zu train / %zu val / %zu test)\n", dir.c_str(),
                planted.dataset.train().size(), planted.dataset.val().size(),
                planted.dataset.test().size());
    return 0;
}
