from cvarmarket.cli import main

main()
