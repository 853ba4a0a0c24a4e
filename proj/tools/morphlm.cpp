#include "morphlm/pipeline/cli.hpp"

int main(int argc, char** argv) {
  return morphlm::pipeline::cli_main(argc, argv);
}
