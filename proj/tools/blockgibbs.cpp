#include <blockgibbs/app.hpp>

int main(int argc, char** argv) { return blockgibbs::app::main(argc, argv); }
