from fairminmax.cli import main

raise SystemExit(main())
