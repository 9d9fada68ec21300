// Writes a built-in synthetic instance as a model JSON with its truth section.

#include <fstream>
#include <iostream>
#include <string>

#include "seqlabel/io.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: export_fixture chain|duplication OUT.json\n";
    return 2;
  }
  const std::string name = argv[1];
  seqlabel::Instance inst;
  if (name == "chain") {
    inst = seqlabel::chain_instance();
  } else if (name == "duplication") {
    inst = seqlabel::duplication_instance();
  } else {
    std::cerr << "unknown instance " << name << '\n';
    return 2;
  }
  std::ofstream out(argv[2]);
  out << seqlabel::model_to_json(inst.model, &inst.truth).dump(2) << '\n';
  return out ? 0 : 1;
}
