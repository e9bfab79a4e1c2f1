from qeraser.cli import main

main()
