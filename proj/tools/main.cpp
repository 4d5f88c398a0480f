#include "boneage.h"

int main(int argc, char** argv) {
  return ba_run(argc, const_cast<const char* const*>(argv));
}
