# Twin CBR Package
